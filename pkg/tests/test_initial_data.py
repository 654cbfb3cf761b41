import numpy as np
import pytest

from pnvcauchy.constraints import constraint_report
from pnvcauchy.errors import (AsymmetricW, BadW0Shape, ClosednessViolated, InvalidSpec, NonPositiveWarp,
                              NonZeroMean, ZeroVector)
from pnvcauchy.geometry import exterior_derivative_1form
from pnvcauchy.initial_data import (LapseField, gen_circle_codazzi, gen_conformal_torus, gen_flat,
                                    gen_open_codazzi, gen_warped, open_codazzi_direction,
                                    periodic_antiderivative)

from conftest import TORUS_SIGMA, TWO_PI, box_chart, circle_chart, torus_chart


def test_flat_generator():
    d = gen_flat(torus_chart(16), [1.0, 0.0])
    assert np.all(d.u == 1.0) and np.all(d.W == 0.0)
    d1 = gen_flat(circle_chart(16), [2.0])
    assert np.all(d1.u == 2.0)
    with pytest.raises(ZeroVector):
        gen_flat(torus_chart(16), [0.0, 0.0])
    with pytest.raises(InvalidSpec):
        gen_flat(torus_chart(16), [1.0])


def test_periodic_antiderivative_is_spectral():
    c = circle_chart(32)
    x = c.coords[0]
    F = periodic_antiderivative(0.3 * np.sin(x), TWO_PI)
    assert np.max(np.abs(F - 0.3 * (1 - np.cos(x)))) < 1e-14


def test_circle_generator():
    c = circle_chart(64)
    d = gen_circle_codazzi(c, "0.3*sin(x1)")
    x = c.coords[0]
    ratio = d.u / np.exp(0.3 * np.cos(x))
    assert np.ptp(ratio) < 1e-13            # equal up to a global constant
    assert np.allclose(d.U[0], d.u)
    d0 = gen_circle_codazzi(c, "0")
    assert np.allclose(d0.u, 1.0)
    with pytest.raises(NonZeroMean):
        gen_circle_codazzi(c, "0.1 + sin(x1)")
    with pytest.raises(InvalidSpec):
        gen_circle_codazzi(torus_chart(16), "sin(x1)")


def test_conformal_torus_default_choice(torus32):
    c = torus32.chart
    x, y = c.coords
    sigma = 0.2 * np.cos(x) * np.cos(y)
    assert np.max(np.abs(torus32.u - np.exp(-sigma))) < 1e-14
    assert torus32.spinor is not None
    assert np.allclose(np.sum(np.abs(torus32.spinor) ** 2, axis=0), torus32.u)
    # U♭ is closed up to truncation
    Uflat = np.einsum("ij...,j...->i...", torus32.g, torus32.U)
    assert np.max(np.abs(exterior_derivative_1form(c, Uflat))) < 1e-12


def test_conformal_torus_flat_case():
    d = gen_conformal_torus(torus_chart(16), "0")
    assert np.allclose(d.u, 1.0) and np.max(np.abs(d.W)) < 1e-14


def test_conformal_torus_symmetry_defect_converges():
    errs, hs = [], []
    for n in (32, 64):
        d = gen_conformal_torus(torus_chart(n), TORUS_SIGMA)
        errs.append(d.provenance["w_asymmetry"])
        hs.append(d.chart.h)
    assert errs[1] < errs[0]


def test_conformal_torus_rejects_open_form():
    with pytest.raises(ClosednessViolated):
        gen_conformal_torus(torus_chart(32), TORUS_SIGMA, f="1", h="sin(x1)")


def test_conformal_torus_rejects_bad_forms():
    with pytest.raises(InvalidSpec):
        gen_conformal_torus(torus_chart(16), "0", a=1, b=2, c=1)


def test_conformal_torus_asymmetry_tolerance():
    with pytest.raises(AsymmetricW):
        gen_conformal_torus(torus_chart(16), "0.4*cos(x1)*cos(x2)", tol_c=1e-6)


def test_conformal_torus_winding_current_has_no_spinor():
    # U = ∂θ + ∂ρ on the flat torus does not wind: spinor present
    d = gen_conformal_torus(torus_chart(16), "0", f="1", h="1")
    assert d.spinor is not None


@pytest.mark.parametrize("hexpr, b", [
    ("exp(0.2*sin(x1))", lambda s: -0.2 * np.cos(s)),
    ("2 + sin(x1)", lambda s: -np.cos(s) / (2 + np.sin(s))),
    ("1", lambda s: 0 * s),
])
def test_warped_generator(hexpr, b):
    c = torus_chart(64)
    d = gen_warped(c, hexpr)
    s = c.coords[0]
    assert np.max(np.abs(d.W[0, 0] - b(s))) < 1e-4
    assert np.max(np.abs(d.W[0, 1])) == 0.0
    assert constraint_report(d).passed


def test_warped_rejects_nonpositive():
    with pytest.raises(NonPositiveWarp):
        gen_warped(torus_chart(16), "sin(x1)")
    with pytest.raises(InvalidSpec):
        gen_warped(torus_chart(16), "1 + 0.1*x2")


def test_open_codazzi_generator():
    c = box_chart(33)
    d = gen_open_codazzi(c, [1.0, 0.0], 0.5)
    assert np.allclose(d.u, np.exp(-c.coords[0] / 2))
    d0 = gen_open_codazzi(c, [1.0, 0.0], 0.0)
    assert np.allclose(d0.u, 1.0) and np.all(d0.W == 0)
    with pytest.raises(BadW0Shape):
        gen_open_codazzi(c, [1.0, 1.0], 0.5)


def test_open_codazzi_direction():
    nhat, c = open_codazzi_direction(0.5 * np.outer([0.6, 0.8], [0.6, 0.8]))
    assert c == pytest.approx(0.5)
    assert np.allclose(np.abs(nhat), [0.6, 0.8])
    with pytest.raises(BadW0Shape):
        open_codazzi_direction(np.eye(2))


def test_lapse_field():
    c = torus_chart(16)
    lam = LapseField("1 + 0.1*sin(t)*cos(x1)")
    s = lam.sample(c, 0.3)
    x = c.coords[0]
    assert np.allclose(s.dt, 0.1 * np.cos(0.3) * np.cos(x), atol=1e-12)
    assert np.allclose(s.d[0], -0.1 * np.sin(0.3) * np.sin(x), atol=1e-3)
    with pytest.raises(InvalidSpec):
        LapseField("cos(x1)").values(c, 0.0)
    assert LapseField(1.0).is_constant


@pytest.mark.parametrize("make", [
    lambda: gen_conformal_torus(torus_chart(16), "x3"),
    lambda: gen_conformal_torus(torus_chart(16), "t*cos(x1)"),
    lambda: gen_circle_codazzi(circle_chart(16), "sin(x2)"),
    lambda: gen_warped(torus_chart(16), "2 + t"),
    lambda: LapseField("1 + 0.1*cos(x2)").values(circle_chart(16), 0.0),
])
def test_expressions_must_use_chart_coordinates(make):
    with pytest.raises(InvalidSpec):
        make()
