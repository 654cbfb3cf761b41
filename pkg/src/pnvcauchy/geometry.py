"""Discrete Riemannian (and pseudo-Riemannian) differential operators.

Every function takes a chart-like object exposing ``dim`` and ``d(f, axis)``
(a :class:`~pnvcauchy.chart.Chart` or :class:`~pnvcauchy.chart.SubChart`)
plus component arrays laid out as described in :mod:`pnvcauchy.chart`.

Conventions
-----------
Christoffel symbols ``G[k, i, j] = Γ^k_{ij}``.

Covariant derivatives put the derivative index first: ``nabla[i, ...]`` is
``(∇_i T)_{...}``.

Curvature, with ``R(X, Y) = [∇_X, ∇_Y] − ∇_[X,Y]``::

    Rup[l, k, i, j] = R^l_{kij},   R(∂_i, ∂_j)∂_k = R^l_{kij} ∂_l
    Rm[a, b, c, d]  = g(R(∂_a, ∂_b)∂_c, ∂_d)
    Ric[j, k]       = R^i_{kij}
    scal            = g^{jk} Ric_{jk}

With this choice the round sphere has positive scalar curvature.  The single
constant ``CURVATURE_SIGN`` flips the whole curvature package.

The divergence of a symmetric 2-tensor is taken with a minus sign,
``div h(X) = −g^{ij} (∇_i h)(∂_j, X)``, so that
``tr d^∇h(X) = div h(X) + d(tr h)(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import metric_inverse, symmetrize

CURVATURE_SIGN = 1.0


def christoffel(chart, g: np.ndarray, ginv: np.ndarray | None = None) -> np.ndarray:
    if ginv is None:
        ginv = metric_inverse(g)
    dg = np.stack([chart.d(g, i) for i in range(chart.dim)])  # dg[i, j, l] = ∂_i g_jl
    # lowered symbols Γ_{l ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    low = 0.5 * (np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg)
                 - dg)
    G = np.einsum("kl...,lij...->kij...", ginv, low)
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def covariant_derivative(chart, G: np.ndarray, T: np.ndarray, kinds: str) -> np.ndarray:
    """∇T with the new (derivative) index in front.

    ``kinds`` lists the index positions of ``T`` ("u" upper, "d" lower);
    an empty string means a scalar.
    """
    T = np.asarray(T)
    out = np.stack([chart.d(T, i) for i in range(chart.dim)])
    for s, kind in enumerate(kinds):
        Tm = np.moveaxis(T, s, 0)
        if kind == "u":
            corr = np.einsum("aim...,m...->ia...", G, Tm)
        elif kind == "d":
            corr = -np.einsum("mia...,m...->ia...", G, Tm)
        else:
            raise ValueError(f"bad index kind {kind!r}")
        out = out + np.moveaxis(corr, 1, s + 1)
    return out


def riemann(chart, G: np.ndarray) -> np.ndarray:
    """``Rup[l, k, i, j] = R^l_{kij}``."""
    dG = np.stack([chart.d(G, i) for i in range(chart.dim)])  # dG[i, l, j, k] = ∂_i Γ^l_jk
    term = np.einsum("iljk...->lkij...", dG)
    term = term - np.swapaxes(term, 2, 3)
    GG = np.einsum("lim...,mjk...->lkij...", G, G)
    return CURVATURE_SIGN * (term + GG - np.swapaxes(GG, 2, 3))


def lower_riemann(Rup: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``Rm[a, b, c, d] = g_{dl} R^l_{cab}``."""
    return np.einsum("dl...,lcab...->abcd...", g, Rup)


def ricci(Rup: np.ndarray) -> np.ndarray:
    return symmetrize(np.einsum("ikij...->jk...", Rup))


def scalar_curvature(Ric: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return np.einsum("jk...,jk...->...", ginv, Ric)


def trace(h: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return np.einsum("ij...,ij...->...", ginv, h)


def dnabla(chart, G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``D[i, j, k] = (∇_i h)_{jk} − (∇_j h)_{ik}``; exactly antisymmetric in (i, j)."""
    nab = covariant_derivative(chart, G, h, "dd")
    return nab - np.swapaxes(nab, 0, 1)


def trace_dnabla(D: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Covector ``X ↦ tr_g D(X, ·, ·) = g^{jk} D_{Xjk}``."""
    return np.einsum("jk...,xjk...->x...", ginv, D)


def divergence(chart, G: np.ndarray, h: np.ndarray, ginv: np.ndarray,
               nab: np.ndarray | None = None) -> np.ndarray:
    if nab is None:
        nab = covariant_derivative(chart, G, h, "dd")
    return -np.einsum("ij...,ijx...->x...", ginv, nab)


def hessian(chart, G: np.ndarray, f: np.ndarray, df: np.ndarray | None = None) -> np.ndarray:
    if df is None:
        df = np.stack([chart.d(f, i) for i in range(chart.dim)])
    ddf = np.stack([chart.d(df, i) for i in range(chart.dim)])
    H = ddf - np.einsum("kij...,k...->ij...", G, df)
    return symmetrize(H)


def laplacian(chart, G: np.ndarray, f: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    return trace(hessian(chart, G, f), ginv)


def wedge_mu_h(mu: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``(μ∧h)_{ijk} = μ_i h_jk − μ_j h_ik``."""
    t = np.einsum("i...,jk...->ijk...", mu, h)
    return t - np.swapaxes(t, 0, 1)


def second_fundamental_form(k: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """II = −ġ/(2λ) for the slice of ``−λ²dt² + g_t``."""
    return -k / (2.0 * lam)


def weingarten(II: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """``W[a, b] = W^a_b = g^{ac} II_{cb}``."""
    return np.einsum("ac...,cb...->ab...", ginv, II)


def exterior_derivative_1form(chart, a: np.ndarray) -> np.ndarray:
    """``(da)_{ij} = ∂_i a_j − ∂_j a_i``."""
    da = np.stack([chart.d(a, i) for i in range(chart.dim)])
    return da - np.swapaxes(da, 0, 1)


@dataclass
class Geometry:
    """Levi-Civita data of one metric on one chart, with lazily built curvature."""

    chart: object
    g: np.ndarray
    ginv: np.ndarray
    G: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def Rup(self) -> np.ndarray:
        if "Rup" not in self._cache:
            self._cache["Rup"] = riemann(self.chart, self.G)
        return self._cache["Rup"]

    @property
    def Rm(self) -> np.ndarray:
        if "Rm" not in self._cache:
            self._cache["Rm"] = lower_riemann(self.Rup, self.g)
        return self._cache["Rm"]

    @property
    def Ric(self) -> np.ndarray:
        if "Ric" not in self._cache:
            self._cache["Ric"] = ricci(self.Rup)
        return self._cache["Ric"]

    @property
    def scal(self) -> np.ndarray:
        if "scal" not in self._cache:
            self._cache["scal"] = scalar_curvature(self.Ric, self.ginv)
        return self._cache["scal"]

    def nabla(self, T: np.ndarray, kinds: str) -> np.ndarray:
        return covariant_derivative(self.chart, self.G, T, kinds)

    def dnabla(self, h: np.ndarray) -> np.ndarray:
        return dnabla(self.chart, self.G, h)

    def divergence(self, h: np.ndarray) -> np.ndarray:
        return divergence(self.chart, self.G, h, self.ginv)

    def hessian(self, f: np.ndarray, df: np.ndarray | None = None) -> np.ndarray:
        return hessian(self.chart, self.G, f, df)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return trace(self.hessian(f), self.ginv)

    def trace(self, h: np.ndarray) -> np.ndarray:
        return trace(h, self.ginv)

    def grad(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("ij...,j...->i...", self.ginv, self.chart.grad(f))


def build_geometry(chart, g: np.ndarray, check: bool = True) -> Geometry:
    g = symmetrize(np.asarray(g, dtype=float))
    ginv = metric_inverse(g, check=check)
    return Geometry(chart, g, ginv, christoffel(chart, g, ginv))


def orthonormal_frame_2d(g: np.ndarray) -> np.ndarray:
    """Gram–Schmidt frame of (∂1, ∂2); ``E[a, i]`` is the i-th component of e_a."""
    e1 = np.stack([1.0 / np.sqrt(g[0, 0]), np.zeros_like(g[0, 0])])
    # ∂2 minus its e1 part, then normalize
    c = g[0, 1] * e1[0]
    raw = np.stack([-c * e1[0], np.ones_like(c)])
    norm = np.sqrt(np.einsum("i...,ij...,j...->...", raw, g, raw))
    return np.stack([e1, raw / norm])
