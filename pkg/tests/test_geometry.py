import numpy as np

from pnvcauchy.geometry import (CURVATURE_SIGN, build_geometry, exterior_derivative_1form,
                                orthonormal_frame_2d, trace_dnabla, wedge_mu_h)
from pnvcauchy.report import observed_orders

from conftest import box_chart, torus_chart


def _conformal(n):
    c = torus_chart(n)
    x, y = c.coords
    s = 0.2 * np.cos(x) * np.cos(y)
    sx, sy = -0.2 * np.sin(x) * np.cos(y), -0.2 * np.cos(x) * np.sin(y)
    lap = -0.4 * np.cos(x) * np.cos(y)
    g = np.exp(2 * s) * np.eye(2).reshape(2, 2, 1, 1)
    return c, g, (sx, sy), lap, s


def _exact_christoffel(ds):
    G = np.zeros((2, 2, 2) + ds[0].shape)
    for k in range(2):
        for i in range(2):
            for j in range(2):
                G[k, i, j] = (k == i) * ds[j] + (k == j) * ds[i] - (i == j) * ds[k]
    return G


def test_curvature_sign_constant_is_documented_value():
    assert CURVATURE_SIGN == 1.0


def test_conformal_torus_christoffel_and_ricci_converge():
    errs_G, errs_R, errs_s, hs = [], [], [], []
    for n in (32, 64, 128):
        c, g, ds, lap, s = _conformal(n)
        geo = build_geometry(c, g)
        K = -np.exp(-2 * s) * lap
        errs_G.append(np.max(np.abs(geo.G - _exact_christoffel(ds))))
        errs_R.append(np.max(np.abs(geo.Ric - K * g)))
        errs_s.append(np.max(np.abs(geo.scal - 2 * K)))
        hs.append(c.h)
    for errs in (errs_G, errs_R, errs_s):
        assert all(o >= 3.5 for o in observed_orders(errs, hs))
    assert errs_s[1] < 1e-4


def test_riemann_symmetries():
    c, g, *_ = _conformal(32)
    Rm = build_geometry(c, g).Rm
    assert np.max(np.abs(Rm + np.swapaxes(Rm, 0, 1))) < 1e-14
    # metric compatibility, hence the other symmetries, hold up to truncation
    assert np.max(np.abs(Rm + np.swapaxes(Rm, 2, 3))) < 1e-3
    assert np.max(np.abs(Rm - np.transpose(Rm, (2, 3, 0, 1, 4, 5)))) < 1e-3


def test_flat_box_is_exactly_flat():
    c = box_chart(12)
    g = np.broadcast_to(np.array([[2.0, 0.3], [0.3, 1.0]]).reshape(2, 2, 1, 1), (2, 2) + c.shape).copy()
    geo = build_geometry(c, g)
    assert np.max(np.abs(geo.G)) < 1e-14
    assert np.max(np.abs(geo.Rm)) < 1e-12


def _sym_field(c):
    x, y = c.coords
    return np.stack([np.stack([np.sin(x), np.cos(x + y)]), np.stack([np.cos(x + y), np.sin(2 * y)])])


def test_trace_dnabla_is_divergence_plus_dtrace():
    # exact for a constant metric, where the stencils commute with the trace
    c = torus_chart(32)
    g = np.broadcast_to(np.array([[2.0, 0.3], [0.3, 1.0]]).reshape(2, 2, 1, 1), (2, 2) + c.shape).copy()
    geo = build_geometry(c, g)
    h = _sym_field(c)
    lhs = trace_dnabla(geo.dnabla(h), geo.ginv)
    assert np.max(np.abs(lhs - geo.divergence(h) - c.grad(geo.trace(h)))) < 1e-12
    # otherwise up to the product-rule truncation error
    errs, hs = [], []
    for n in (32, 64):
        c, g, *_ = _conformal(n)
        geo = build_geometry(c, g)
        h = _sym_field(c)
        lhs = trace_dnabla(geo.dnabla(h), geo.ginv)
        errs.append(np.max(np.abs(lhs - geo.divergence(h) - c.grad(geo.trace(h)))))
        hs.append(c.h)
    assert observed_orders(errs, hs)[0] >= 3.5


def test_dnabla_of_metric_vanishes():
    c, g, *_ = _conformal(32)
    geo = build_geometry(c, g)
    assert np.max(np.abs(geo.dnabla(g))) < 1e-3
    assert np.max(np.abs(geo.nabla(g, "dd"))) < 1e-3


def test_hessian_and_laplacian_of_conformal_metric():
    c, g, ds, lap, s = _conformal(64)
    geo = build_geometry(c, g)
    x, y = c.coords
    f = np.sin(x)
    # conformal change: Δ_g f = e^{-2σ} Δ_0 f in two dimensions
    assert np.max(np.abs(geo.laplacian(f) - np.exp(-2 * s) * (-np.sin(x)))) < 1e-5
    H = geo.hessian(f)
    assert np.allclose(H, np.swapaxes(H, 0, 1))


def test_wedge_and_exterior_derivative():
    c = torus_chart(32)
    x, y = c.coords
    a = np.stack([np.sin(y), np.zeros_like(x)])
    da = exterior_derivative_1form(c, a)
    assert np.max(np.abs(da[1, 0] - np.cos(y))) < 1e-4
    assert np.allclose(da, -np.swapaxes(da, 0, 1))
    mu = np.stack([np.ones_like(x), np.zeros_like(x)])
    w = wedge_mu_h(mu, np.ones((2, 2) + c.shape))
    assert np.allclose(w, -np.swapaxes(w, 0, 1))


def test_orthonormal_frame():
    c = torus_chart(16)
    x, y = c.coords
    g = np.stack([np.stack([2 + np.sin(x), 0.3 * np.cos(y)]), np.stack([0.3 * np.cos(y), 1 + 0.5 * np.cos(x)])])
    E = orthonormal_frame_2d(g)
    gram = np.einsum("ai...,ij...,bj...->ab...", E, g, E)
    assert np.allclose(gram, np.eye(2).reshape(2, 2, 1, 1))
    assert np.allclose(E[0, 1], 0.0)   # e1 is parallel to the first coordinate field
