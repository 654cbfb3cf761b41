import numpy as np
import pytest

from pnvcauchy.errors import InvalidSpec, SignatureError
from pnvcauchy.evolution import evolve, initial_state
from pnvcauchy.initial_data import gen_circle_codazzi
from pnvcauchy.report import observed_orders
from pnvcauchy.spacetime import (assemble, frame_ricci, gcm_residuals, oracle_block, parallel_vector_report,
                                 parallel_vector_residual, random_smooth_block, ricci_flat_relations,
                                 ricci_structure_residuals, signature_counts)

from conftest import TWO_PI, circle_chart, torus_chart


def _flat_fields(chart, L):
    n = chart.dim
    g = np.broadcast_to(np.eye(n).reshape((n, n, 1) + (1,) * n), (n, n, L) + chart.shape).copy()
    U = np.zeros((n, L) + chart.shape)
    U[0] = 1.0
    u = np.ones((L,) + chart.shape)
    return g, U, u, u.copy()


def test_assemble_validates_input():
    c = torus_chart(8)
    g, U, u, lam = _flat_fields(c, 10)
    times = np.linspace(0, 0.9, 10)
    blk = assemble(c, times, g, U, u, lam)
    assert blk.gbar.shape == (3, 3, 10, 8, 8)
    assert signature_counts(blk.gbar) == (1, 1)
    with pytest.raises(InvalidSpec):
        assemble(c, times[:9], g[:, :, :9], U[:, :9], u[:9], lam[:9])
    bad = times.copy()
    bad[3] += 0.01
    with pytest.raises(InvalidSpec):
        assemble(c, bad, g, U, u, lam)
    with pytest.raises(SignatureError):
        assemble(c, times, g, U, u, -lam)
    with pytest.raises(SignatureError):
        assemble(c, times, -g, U, u, lam)


def test_minkowski_block_is_exactly_parallel():
    c = torus_chart(8)
    blk = assemble(c, np.linspace(0, 0.9, 10), *_flat_fields(c, 10))
    r = parallel_vector_residual(blk)
    for key in ("nabla_V", "spatial", "time_U", "time_u", "null"):
        assert np.max(np.abs(r[key])) < 1e-13
    assert np.max(np.abs(blk.geometry.Rm)) < 1e-12


def test_oracle_block_has_parallel_null_vector():
    d = gen_circle_codazzi(circle_chart(64), "0.3*sin(x1)")
    h = d.chart.h
    times = np.arange(11) * 0.5 * h
    blk = oracle_block(d, times)
    rep = parallel_vector_report(blk, tol=1e-5)
    assert rep.passed, rep.to_dict()
    assert rep["null_norm"].linf < 1e-14


def test_evolved_block_matches_split():
    d = gen_circle_codazzi(circle_chart(64), "0.3*sin(x1)")
    res = evolve("pnv_a", initial_state(d), d.chart, d.lapse, 0.5, TWO_PI / 128)
    rep = parallel_vector_report(res.block, tol=1e-5)
    assert rep.passed, rep.to_dict()


def test_gcm_converges_on_random_block():
    errs = {k: [] for k in ("gauss", "codazzi", "mainardi")}
    hs = []
    for n in (32, 64):
        c = torus_chart(n)
        blk = random_smooth_block(c, np.arange(11) * 0.5 * c.h, seed=3)
        r = gcm_residuals(blk)
        m = blk.mask()
        for k in errs:
            errs[k].append(float(np.max(np.abs(r[k][..., m]))))
        hs.append(c.h)
    # the spatial block of R̄ uses the same stencils as the slice curvature,
    # so the Gauss equation holds to rounding; the others converge
    assert max(errs["gauss"]) < 1e-14
    for k in ("codazzi", "mainardi"):
        assert errs[k][1] < 1e-5, k
        assert observed_orders(errs[k], hs)[0] > 3.5, (k, errs[k])


def test_random_block_ricci_flat_relations_hold():
    c = torus_chart(32)
    blk = random_smooth_block(c, np.arange(11) * 0.5 * c.h, seed=1)
    r = ricci_flat_relations(blk)
    m = blk.mask()
    assert np.max(np.abs(r["hamiltonian"][m])) < 1e-3
    assert np.max(np.abs(r["momentum"][..., m])) < 1e-2


def test_frame_ricci_matches_trace():
    errs, hs = [], []
    for n in (32, 64):
        c = torus_chart(n)
        blk = random_smooth_block(c, np.arange(11) * 0.5 * c.h, seed=2)
        geo = blk.geometry
        errs.append(float(np.max(np.abs(frame_ricci(blk, geo.Rm) - geo.Ric)[..., blk.mask()])))
        hs.append(c.h)
    assert errs[1] < 1e-5
    assert observed_orders(errs, hs)[0] > 3.5


def test_random_block_seed_is_deterministic():
    c = torus_chart(8)
    t = np.arange(10) * 0.1
    a = random_smooth_block(c, t, seed=5)
    b = random_smooth_block(c, t, seed=5)
    assert np.array_equal(a.gbar, b.gbar)
    assert not np.array_equal(a.gbar, random_smooth_block(c, t, seed=6).gbar)


def test_ricci_structure_on_oracle():
    d = gen_circle_codazzi(circle_chart(64), "0.3*sin(x1)")
    blk = oracle_block(d, np.arange(11) * 0.5 * d.chart.h)
    r = ricci_structure_residuals(blk)
    m = blk.mask()
    assert np.max(np.abs(r["ric_rank"][..., m])) < 1e-4
    assert np.max(np.abs(r["scal"][m])) < 1e-4
