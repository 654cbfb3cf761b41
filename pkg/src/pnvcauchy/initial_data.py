"""Initial-data generators for the null-vector Cauchy problem.

Every generator returns an :class:`InitialData` quadruple (g, W, U, u) on a
chart, together with a lapse.  The data are meant to satisfy

    ∇U + u W = 0,    g(U, U) = u² > 0,

which the constraints module checks independently.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .chart import Chart
from .errors import (AsymmetricW, BadW0Shape, ClosednessViolated, InvalidSpec,
                     NonPositiveWarp, NonZeroMean, ZeroVector)
from .expr import Expr
from .fields import antisymmetric_part, symmetrize
from .geometry import build_geometry, orthonormal_frame_2d

log = logging.getLogger(__name__)

# step used for time derivatives of lapse expressions
LAPSE_DT = 1e-3
# C in the C * h^4 * scale tolerances used by generator self-checks
GENERATOR_TOL_C = 100.0


@dataclass
class LapseSample:
    """λ and the derivatives the evolution systems need, at one time."""

    lam: np.ndarray
    dt: np.ndarray          # ∂_t λ
    d: np.ndarray           # ∂_i λ
    dd: np.ndarray          # ∂_i ∂_j λ
    dtd: np.ndarray         # ∂_t ∂_i λ


class LapseField:
    """Positive lapse given as an expression in (t, x1, ..., xn).

    Spatial derivatives come from the chart stencils, ∂_t from a five-point
    difference in t with step ``LAPSE_DT``.  Closed-form overrides can be
    supplied as expressions: ``dt`` for ∂_t λ.
    """

    def __init__(self, expr: Expr | str | float = 1.0, dt: Expr | str | None = None):
        self.expr = expr if isinstance(expr, Expr) else Expr(expr)
        self.dt_expr = None if dt is None else (dt if isinstance(dt, Expr) else Expr(dt))

    @property
    def is_constant(self) -> bool:
        return self.expr.is_constant

    def values(self, chart, t: float) -> np.ndarray:
        extra = self.expr.variables - {"t"} - {f"x{i}" for i in range(1, chart.dim + 1)}
        if extra:
            raise InvalidSpec(f"lapse uses {', '.join(sorted(extra))}, which this chart does not have")
        lam = self.expr.on_grid(chart.coords, t)
        if not np.all(np.isfinite(lam)) or np.min(lam) <= 0:
            raise InvalidSpec(f"lapse must be finite and positive (min {np.min(lam):.3g} at t={t})")
        return lam

    def time_derivative(self, chart, t: float) -> np.ndarray:
        if self.dt_expr is not None:
            return self.dt_expr.on_grid(chart.coords, t)
        if not self.expr.depends_on_t:
            return np.zeros(chart.shape)
        d = LAPSE_DT
        f = [self.expr.on_grid(chart.coords, t + s * d) for s in (-2, -1, 1, 2)]
        return (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * d)

    def sample(self, chart, t: float) -> LapseSample:
        lam = self.values(chart, t)
        n = chart.dim
        if self.is_constant:
            z1 = np.zeros((n,) + chart.shape)
            return LapseSample(lam, np.zeros(chart.shape), z1, np.zeros((n, n) + chart.shape), z1.copy())
        dt = self.time_derivative(chart, t)
        d = chart.grad(lam)
        dd = symmetrize(np.stack([chart.d(d, i) for i in range(n)]))
        return LapseSample(lam, dt, d, dd, chart.grad(dt))

    def to_dict(self) -> dict:
        out = {"expr": self.expr.text}
        if self.dt_expr is not None:
            out["dt"] = self.dt_expr.text
        return out


@dataclass
class InitialData:
    chart: Chart
    g: np.ndarray
    W: np.ndarray        # W[a, b] = W^a_b
    U: np.ndarray
    u: np.ndarray
    lapse: LapseField
    provenance: dict = field(default_factory=dict)
    spinor: np.ndarray | None = None   # complex (2, *grid) slice spinor, 2D only

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def II(self) -> np.ndarray:
        """II(X, Y) = g(W X, Y)."""
        return np.einsum("ca...,cb...->ab...", self.g, self.W)


def _const_metric(chart, mat) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    return np.broadcast_to(mat.reshape(mat.shape + (1,) * chart.dim), mat.shape + chart.shape).copy()


def _spatial_expr(e, chart, what: str) -> Expr:
    """Parse ``e`` and check that it only uses the chart coordinates."""
    e = e if isinstance(e, Expr) else Expr(e)
    allowed = {f"x{i}" for i in range(1, chart.dim + 1)}
    extra = e.variables - allowed
    if extra:
        raise InvalidSpec(f"{what} may only use {', '.join(sorted(allowed))}, got {', '.join(sorted(extra))}")
    return e


def _lapse(lapse) -> LapseField:
    if isinstance(lapse, LapseField):
        return lapse
    return LapseField(1.0 if lapse is None else lapse)


def gen_flat(chart: Chart, U0, lapse=None) -> InitialData:
    """Flat metric, W = 0 and a constant vector field U0."""
    U0 = np.asarray(U0, dtype=float).reshape(-1)
    if U0.shape != (chart.dim,):
        raise InvalidSpec(f"U0 must have {chart.dim} components")
    norm = float(np.linalg.norm(U0))
    if norm == 0.0:
        raise ZeroVector("U0 must be non-zero")
    n = chart.dim
    g = _const_metric(chart, np.eye(n))
    U = np.broadcast_to(U0.reshape((n,) + (1,) * n), (n,) + chart.shape).copy()
    data = InitialData(chart, g, np.zeros((n, n) + chart.shape), U, np.full(chart.shape, norm),
                       _lapse(lapse), {"generator": "flat", "U0": U0.tolist()})
    if n == 2:
        alpha = np.full(chart.shape, math.atan2(U0[1], U0[0]))
        root = math.sqrt(norm)
        data.spinor = np.stack([root * np.cos(alpha / 2), 1j * root * np.sin(alpha / 2)])
    return data


def periodic_antiderivative(w: np.ndarray, length: float) -> np.ndarray:
    """Spectral antiderivative of a zero-mean periodic sample, vanishing at node 0."""
    n = w.size
    k = np.fft.rfftfreq(n, d=length / n) * 2.0 * np.pi
    wh = np.fft.rfft(w)
    Fh = np.zeros_like(wh)
    Fh[1:] = wh[1:] / (1j * k[1:])
    F = np.fft.irfft(Fh, n)
    return F - F[0]


def gen_circle_codazzi(chart: Chart, w, lapse=None) -> InitialData:
    """Flat circle with W = w, u = exp(−∫₀ˣ w), U = u ∂x.

    The antiderivative is computed spectrally, which is exact up to the
    resolution of ``w`` on the grid.
    """
    if chart.dim != 1 or not chart.periodic[0]:
        raise InvalidSpec("circle generator needs a 1D periodic chart")
    wexpr = _spatial_expr(w, chart, "w")
    wv = wexpr.on_grid(chart.coords)
    mean = float(np.mean(wv))
    if abs(mean) > 1e-10:
        raise NonZeroMean(f"mean of w is {mean:.3e}; u would not be periodic")
    a, b = chart.spec.extents[0]
    F = periodic_antiderivative(wv, b - a)
    u = np.exp(-F)
    g = np.ones((1, 1) + chart.shape)
    return InitialData(chart, g, wv[None, None].copy(), u[None].copy(), u, _lapse(lapse),
                       {"generator": "circle_codazzi", "w": wexpr.text})


def _frame_angle(chart, g, U):
    """Angle of U in the Gram–Schmidt frame of (∂1, ∂2), unwrapped."""
    E = orthonormal_frame_2d(g)
    gU = np.einsum("ij...,j...->i...", g, U)
    c1 = np.einsum("i...,i...->...", E[0], gU)
    c2 = np.einsum("i...,i...->...", E[1], gU)
    alpha = np.arctan2(c2, c1)
    for ax in range(chart.dim):
        alpha = np.unwrap(alpha, axis=ax)
    return alpha


def gen_conformal_torus(chart: Chart, sigma, a: float = 1.0, b: float = 0.0, c: float = 1.0,
                        f=None, h=None, lapse=None, tol_c: float = GENERATOR_TOL_C) -> InitialData:
    """Conformally flat torus g = e^{2σ}(a dθ² + 2b dθdρ + c dρ²) with U = f∂θ + h∂ρ.

    Without ``f``/``h`` the closed choice e^{2σ} f = 1, h = 0 is used.  W is
    computed as −∇U/u and must come out g-symmetric.  A spinor γ·v with
    |γ|² = u is attached when the Dirac current does not wind around the torus.
    """
    if chart.dim != 2 or not all(chart.periodic):
        raise InvalidSpec("torus generator needs a 2D periodic chart")
    if a <= 0 or c <= 0 or a * c <= b * b:
        raise InvalidSpec("need a, c > 0 and ac > b^2")
    sexpr = _spatial_expr(sigma, chart, "sigma")
    s = sexpr.on_grid(chart.coords)
    e2s = np.exp(2.0 * s)
    if f is None and h is None:
        fv, hv = np.exp(-2.0 * s), np.zeros(chart.shape)
        fdesc, hdesc = "exp(-2*sigma)", "0"
    else:
        fexpr = _spatial_expr(0.0 if f is None else f, chart, "f")
        hexpr = _spatial_expr(0.0 if h is None else h, chart, "h")
        fv, hv = fexpr.on_grid(chart.coords), hexpr.on_grid(chart.coords)
        fdesc, hdesc = fexpr.text, hexpr.text

    F, H = e2s * fv, e2s * hv
    lhs = b * chart.d(F, 0) - a * chart.d(F, 1)
    rhs = -c * chart.d(H, 0) + b * chart.d(H, 1)
    scale = max(1.0, float(np.max(np.abs(F) + np.abs(H))))
    closed = float(np.max(np.abs(lhs - rhs)))
    if closed > 10.0 * chart.h**4 * scale:
        raise ClosednessViolated(f"closedness PDE residual {closed:.3e} for (f, h)")

    g0 = np.array([[a, b], [b, c]])
    g = e2s * g0.reshape(2, 2, 1, 1)
    U = np.stack([fv, hv])
    u = np.sqrt(np.einsum("i...,ij...,j...->...", U, g, U))
    if np.min(u) <= 0:
        raise ZeroVector("U has zeros")
    geo = build_geometry(chart, g)
    nab = geo.nabla(U, "u")                   # nab[i, a] = ∇_i U^a
    W = -np.swapaxes(nab, 0, 1) / u           # W^a_i
    II = np.einsum("ca...,cb...->ab...", g, W)
    asym = float(np.max(np.abs(antisymmetric_part(II))))
    if asym > tol_c * chart.h**4 * max(1.0, float(np.max(np.abs(II)))):
        raise AsymmetricW(f"g(WX,Y) - g(X,WY) = {asym:.3e}")
    W = np.einsum("ac...,cb...->ab...", geo.ginv, symmetrize(II))

    data = InitialData(chart, g, W, U, u, _lapse(lapse),
                       {"generator": "conformal_torus", "sigma": sexpr.text, "a": a, "b": b,
                        "c": c, "f": fdesc, "h": hdesc, "w_asymmetry": asym})
    alpha = _frame_angle(chart, g, U)
    winding = max(float(np.max(np.abs(alpha[0] - alpha[-1]))), float(np.max(np.abs(alpha[:, 0] - alpha[:, -1]))))
    if winding > np.pi:
        log.warning("Dirac current winds around the torus; no spinor for the trivial spin structure")
        data.provenance["spinor"] = "unavailable"
    else:
        root = np.sqrt(u)
        data.spinor = np.stack([root * np.cos(alpha / 2), 1j * root * np.sin(alpha / 2)])
        data.provenance["spinor"] = "gamma*v, |gamma|^2 = u"
    return data


def gen_warped(chart: Chart, hw, lapse=None) -> InitialData:
    """Warped product ds² + h(s)² g_F over a flat fiber; s is the first axis."""
    hexpr = _spatial_expr(hw, chart, "warping function")
    if hexpr.variables - {"x1"}:
        raise InvalidSpec("warping function may depend on x1 only")
    hv = hexpr.on_grid(chart.coords)
    if np.min(hv) <= 0:
        raise NonPositiveWarp(f"warping function has minimum {np.min(hv):.3g}")
    if chart.periodic[0]:
        a, b = chart.spec.extents[0]
        ends = np.broadcast_to(hexpr(0.0, (np.array([a, b]),) + tuple(np.zeros(2) for _ in range(chart.dim - 1))), (2,))
        if abs(float(ends[1] - ends[0])) > 1e-10:
            raise InvalidSpec("warping function is not periodic on a periodic base")
    n = chart.dim
    g = np.zeros((n, n) + chart.shape)
    g[0, 0] = 1.0
    for i in range(1, n):
        g[i, i] = hv**2
    bfun = -chart.d(np.log(hv), 0)
    W = np.zeros((n, n) + chart.shape)
    for i in range(n):
        W[i, i] = bfun
    U = np.zeros((n,) + chart.shape)
    U[0] = hv
    return InitialData(chart, g, W, U, hv.copy(), _lapse(lapse),
                       {"generator": "warped", "h": hexpr.text})


def open_codazzi_direction(W0) -> tuple[np.ndarray, float]:
    """Split a constant matrix of the form c n̂n̂ᵀ into (n̂, c)."""
    W0 = np.asarray(W0, dtype=float)
    if W0.ndim != 2 or W0.shape[0] != W0.shape[1] or not np.allclose(W0, W0.T, atol=1e-12):
        raise BadW0Shape("W0 must be a symmetric square matrix")
    vals, vecs = np.linalg.eigh(W0)
    i = int(np.argmax(np.abs(vals)))
    c = float(vals[i])
    nhat = vecs[:, i]
    if np.max(np.abs(W0 - c * np.outer(nhat, nhat))) > 1e-12 * max(1.0, abs(c)):
        raise BadW0Shape("W0 is not of rank-one form c n n^T")
    if c == 0.0:
        nhat = np.eye(W0.shape[0])[0]
    return nhat, c


def gen_open_codazzi(chart: Chart, nhat, c: float, lapse=None) -> InitialData:
    """Flat box with constant W = c n̂n̂ᵀ, u = exp(−c⟨n̂, x⟩), U = u n̂."""
    nhat = np.asarray(nhat, dtype=float).reshape(-1)
    n = chart.dim
    if nhat.shape != (n,):
        raise BadW0Shape(f"unit vector must have {n} components")
    if abs(float(np.linalg.norm(nhat)) - 1.0) > 1e-12:
        raise BadW0Shape("direction vector is not a unit vector")
    proj = sum(nhat[i] * chart.coords[i] for i in range(n))
    u = np.exp(-c * proj)
    g = _const_metric(chart, np.eye(n))
    W = _const_metric(chart, c * np.outer(nhat, nhat))
    U = nhat.reshape((n,) + (1,) * n) * u
    return InitialData(chart, g, W, U, u, _lapse(lapse),
                       {"generator": "open_codazzi", "nhat": nhat.tolist(), "c": float(c)})
