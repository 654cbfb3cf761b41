"""Lorentzian blocks ḡ = −λ²dt² + g_t built from an evolution history.

A block is an (n+1)-dimensional chart whose axis 0 is time (OPEN, one node
per stored level) and whose remaining axes are the spatial chart.  Every
check here differentiates the assembled metric directly; nothing is taken
from the evolution right-hand sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import Boundary, Chart, ChartSpec, SubChart, build_chart, interior_mask
from .errors import InvalidSpec, SignatureError, SingularMetric
from .fields import field_norm, metric_inverse
from .geometry import Geometry, build_geometry, trace, trace_dnabla
from .report import ResidualEntry, ResidualReport

MIN_LEVELS = 10
TIME_MASK_WIDTH = 2


@dataclass
class SpacetimeBlock:
    spatial: Chart
    chart: Chart
    times: np.ndarray
    g: np.ndarray       # (n, n, L, *grid)
    U: np.ndarray       # (n, L, *grid)
    u: np.ndarray       # (L, *grid)
    lam: np.ndarray     # (L, *grid)
    gbar: np.ndarray    # (n+1, n+1, L, *grid)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.spatial.dim

    @property
    def dt(self) -> float:
        return self.chart.spacing[0]

    @property
    def sub(self) -> SubChart:
        return SubChart(self.chart, 1, self.n)

    def mask(self, width: int = TIME_MASK_WIDTH) -> np.ndarray:
        return interior_mask(self.chart, width)

    def d_t(self, f: np.ndarray) -> np.ndarray:
        return self.chart.d(f, 0)

    # cached geometry ---------------------------------------------------
    @property
    def geometry(self) -> Geometry:
        if "geo" not in self._cache:
            self._cache["geo"] = lorentz_geometry(self)
        return self._cache["geo"]

    @property
    def slice_geometry(self) -> Geometry:
        if "slice" not in self._cache:
            self._cache["slice"] = build_geometry(self.sub, self.g)
        return self._cache["slice"]

    @property
    def reference_metric(self) -> tuple[np.ndarray, np.ndarray]:
        """Riemannian metric λ²dt² + g_t and its inverse, used only for norms."""
        if "ref" not in self._cache:
            ref = self.gbar.copy()
            ref[0, 0] = -ref[0, 0]
            self._cache["ref"] = (ref, metric_inverse(ref))
        return self._cache["ref"]

    def V(self) -> np.ndarray:
        """V = (u/λ)∂_t − U."""
        return np.concatenate([(self.u / self.lam)[None], -self.U])

    def V_flat(self) -> np.ndarray:
        return np.concatenate([(-self.lam * self.u)[None], -np.einsum("ij...,j...->i...", self.g, self.U)])

    def second_fundamental_form(self) -> np.ndarray:
        if "II" not in self._cache:
            self._cache["II"] = -self.d_t(self.g) / (2.0 * self.lam)
        return self._cache["II"]

    def norm(self, T: np.ndarray, kinds: str, kind: str = "linf", mask=None, spatial: bool = False) -> float:
        mask = self.mask() if mask is None else mask
        if spatial:
            geo = self.slice_geometry
            return field_norm(T, geo.g, geo.ginv, kinds, kind, mask)
        ref, refinv = self.reference_metric
        return field_norm(T, ref, refinv, kinds, kind, mask)


def block_spec(spatial: ChartSpec, times: np.ndarray) -> ChartSpec:
    return ChartSpec(spatial.dim + 1, ((float(times[0]), float(times[-1])),) + spatial.extents,
                     (len(times),) + spatial.points, (Boundary.OPEN,) + spatial.boundary)


def assemble(spatial: Chart, times, g, U, u, lam) -> SpacetimeBlock:
    """Stack per-level fields into a block and check the Lorentz signature."""
    times = np.asarray(times, dtype=float)
    if times.size < MIN_LEVELS:
        raise InvalidSpec(f"need at least {MIN_LEVELS} time levels, got {times.size}")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(times[-1])):
        raise InvalidSpec("time levels must be uniformly spaced and increasing")
    g, U, u, lam = (np.asarray(a, dtype=float) for a in (g, U, u, lam))
    if not np.all(np.isfinite(lam)) or np.min(lam) <= 0:
        raise SignatureError(f"lapse must be positive (min {np.min(lam):.3g})")
    try:
        metric_inverse(g)
    except SingularMetric as exc:
        raise SignatureError(f"spatial metric is not positive definite: {exc}") from exc
    n = spatial.dim
    gbar = np.zeros((n + 1, n + 1) + g.shape[2:])
    gbar[0, 0] = -lam**2
    gbar[1:, 1:] = g
    chart = build_chart(block_spec(spatial.spec, times))
    return SpacetimeBlock(spatial, chart, times, g, U, u, lam, gbar)


def assemble_from_history(spatial: Chart, history, lapse) -> SpacetimeBlock:
    times = np.array([s.t for s in history])
    g = np.stack([s.g for s in history], axis=2)
    U = np.stack([s.U for s in history], axis=1)
    u = np.stack([s.u for s in history])
    lam = np.stack([lapse.values(spatial, s.t) for s in history])
    return assemble(spatial, times, g, U, u, lam)


def signature_counts(gbar: np.ndarray) -> tuple[int, int]:
    """(min, max) number of negative eigenvalues over all nodes."""
    m = np.moveaxis(gbar, (0, 1), (-2, -1))
    neg = np.sum(np.linalg.eigvalsh(m) < 0, axis=-1)
    return int(neg.min()), int(neg.max())


def lorentz_geometry(block: SpacetimeBlock) -> Geometry:
    lo, hi = signature_counts(block.gbar)
    if lo != 1 or hi != 1:
        raise SignatureError("assembled metric is not Lorentzian everywhere")
    return build_geometry(block.chart, block.gbar, check=False)


def frame_ricci(block: SpacetimeBlock, Rm: np.ndarray) -> np.ndarray:
    """Ric̄ from an orthonormal frame: −R̄(T,·,·,T) + Σ R̄(E_i,·,·,E_i)."""
    n = block.n
    T = np.zeros((n + 1,) + block.lam.shape)
    T[0] = 1.0 / block.lam
    # g = L Lᵀ, so the columns of L^{-T} are a g-orthonormal frame
    L = np.linalg.cholesky(np.moveaxis(block.g, (0, 1), (-2, -1)))
    F = np.swapaxes(np.linalg.inv(L), -1, -2)
    E = np.zeros((n, n + 1) + block.lam.shape)
    E[:, 1:] = np.moveaxis(F, (-2, -1), (1, 0))   # E[a, i] = F[..., i, a]
    out = -np.einsum("a...,abcd...,d...->bc...", T, Rm, T)
    for a in range(n):
        out = out + np.einsum("a...,abcd...,d...->bc...", E[a], Rm, E[a])
    return out


def parallel_vector_residual(block: SpacetimeBlock) -> dict:
    """∇̄V together with its split into slice quantities.

    Returns ``nabla_V[μ, ν] = ∇̄_μ V^ν`` and the split residuals
    ``spatial`` (∇U + uW), ``time_U`` (U̇ − u grad λ − λW(U)),
    ``time_u`` (u̇ − dλ(U)) and ``null`` (ḡ(V, V)).
    """
    geo = block.geometry
    V = block.V()
    nabV = geo.nabla(V, "u")
    sg = block.slice_geometry
    II = block.second_fundamental_form()
    W = np.einsum("ac...,cb...->ab...", sg.ginv, II)
    spatial = np.swapaxes(sg.nabla(block.U, "u"), 0, 1) + block.u * W
    dlam = block.sub.grad(block.lam)
    grad_lam = np.einsum("ij...,j...->i...", sg.ginv, dlam)
    WU = np.einsum("ab...,b...->a...", W, block.U)
    time_U = block.d_t(block.U) - block.u * grad_lam - block.lam * WU
    time_u = block.d_t(block.u) - np.einsum("i...,i...->...", dlam, block.U)
    null = np.einsum("i...,ij...,j...->...", V, block.gbar, V)
    return {"nabla_V": nabV, "spatial": spatial, "time_U": time_U, "time_u": time_u, "null": null}


def parallel_vector_report(block: SpacetimeBlock, tol: float | None = None) -> ResidualReport:
    r = parallel_vector_residual(block)
    rep = ResidualReport("parallel_vector")
    m = block.mask()
    for name, arr, kinds, spatial in (("nabla_V", r["nabla_V"], "du", False),
                                      ("split_spatial", r["spatial"], "ud", True),
                                      ("split_time_U", r["time_U"], "u", True),
                                      ("split_time_u", r["time_u"], "", True),
                                      ("null_norm", r["null"], "", True)):
        rep.add(ResidualEntry(name, block.norm(arr, kinds, "linf", m, spatial),
                              block.norm(arr, kinds, "l2", m, spatial), tol))
    return rep


def gcm_residuals(block: SpacetimeBlock) -> dict:
    """LHS − RHS of the Gauss, Codazzi and Mainardi equations on every level."""
    Rm = block.geometry.Rm
    sg = block.slice_geometry
    lam = block.lam
    II = block.second_fundamental_form()
    W = np.einsum("ac...,cb...->ab...", sg.ginv, II)
    gauss = (Rm[1:, 1:, 1:, 1:] - sg.Rm
             + np.einsum("ik...,jl...->ijkl...", II, II) - np.einsum("il...,jk...->ijkl...", II, II))
    codazzi = Rm[1:, 1:, 1:, 0] / lam - sg.dnabla(II)
    IIW = np.einsum("xa...,ay...->xy...", II, W)             # II(X, W Y)
    hess = sg.hessian(lam)
    mainardi = Rm[1:, 0, 0, 1:] / lam**2 - IIW - (block.d_t(II) + hess) / lam
    return {"gauss": gauss, "codazzi": codazzi, "mainardi": mainardi}


def gcm_report(block: SpacetimeBlock, tol: float | None = None) -> ResidualReport:
    r = gcm_residuals(block)
    rep = ResidualReport("gauss_codazzi_mainardi")
    m = block.mask()
    for name, kinds in (("gauss", "dddd"), ("codazzi", "ddd"), ("mainardi", "dd")):
        rep.add(ResidualEntry(name, block.norm(r[name], kinds, "linf", m, True),
                              block.norm(r[name], kinds, "l2", m, True), tol))
    return rep


def ricci_structure_residuals(block: SpacetimeBlock, u_eps: float = 1e-8) -> dict:
    """Residuals expressing Ric̄ = f V♭⊗V♭ and the induced slice identities."""
    n = block.n
    geo = block.geometry
    Ric = geo.Ric
    lam, u = block.lam, block.u
    safe_u = np.where(u > u_eps, u, 1.0)
    Tvec = np.zeros((n + 1,) + lam.shape)
    Tvec[0] = 1.0 / lam
    Nvec = np.concatenate([np.zeros((1,) + lam.shape), block.U / safe_u])
    RTT = np.einsum("a...,ab...,b...->...", Tvec, Ric, Tvec)
    RNN = np.einsum("a...,ab...,b...->...", Nvec, Ric, Nvec)
    RNT = np.einsum("a...,ab...,b...->...", Nvec, Ric, Tvec)
    f = RTT / safe_u**2
    Vf = block.V_flat()
    rank = Ric - f * np.einsum("a...,b...->ab...", Vf, Vf)
    Tflat = np.einsum("ab...,b...->a...", block.gbar, Tvec)
    Nflat = np.einsum("ab...,b...->a...", block.gbar, Nvec)
    eye = np.broadcast_to(np.eye(n + 1).reshape((n + 1, n + 1) + (1,) * lam.ndim), Ric.shape)
    Pi = eye + np.einsum("a...,b...->ab...", Tvec, Tflat) - np.einsum("a...,b...->ab...", Nvec, Nflat)
    perp = np.einsum("ac...,ab...->cb...", Pi, Ric)
    scal = geo.scal

    # slice identities
    sg = block.slice_geometry
    II = block.second_fundamental_form()
    W = np.einsum("ac...,cb...->ab...", sg.ginv, II)
    D = sg.dnabla(II)
    trD = trace_dnabla(D, sg.ginv)
    N = block.U / safe_u
    Nf = np.einsum("ij...,j...->i...", block.g, N)
    trDN = np.einsum("i...,i...->...", trD, N)
    trII = trace(II, sg.ginv)
    normII2 = np.einsum("ab...,ba...->...", W, W)
    eye_n = np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * lam.ndim), block.g.shape)
    P = eye_n - np.einsum("a...,b...->ab...", N, Nf)            # projector onto N⊥, P[a, b] = P^a_b
    Ric_s = sg.Ric
    WII = np.einsum("ax...,ay...->xy...", W, II)                 # II(W X, Y)
    rhs_xy = np.einsum("i...,ixy...->xy...", N, D) + WII - trII * II
    slice1 = np.einsum("a...,ab...->b...", trD, P)               # tr d^∇II restricted to N⊥
    slice2 = sg.divergence(II) + sg.chart.grad(trII) - trDN * Nf
    slice3 = 2.0 * trDN - (sg.scal - normII2 + trII**2)
    slice4 = np.einsum("ax...,by...,ab...->xy...", P, P, Ric_s - rhs_xy)
    slice5 = np.einsum("ax...,ab...,b...->x...", P, Ric_s - WII + trII * II, N)
    slice6 = (np.einsum("a...,ab...,b...->...", N, Ric_s, N) - trDN
              + trII * np.einsum("a...,ab...,b...->...", N, II, N)
              - np.einsum("a...,ab...,b...->...", N, WII, N))
    return {
        "f": f, "ric_TT_minus_NN": RTT - RNN, "ric_TT_minus_NT": RTT - RNT,
        "ric_rank": rank, "ric_perp": perp, "scal": scal,
        "slice_trD_perp": slice1, "slice_div": slice2, "slice_hamiltonian": slice3,
        "slice_ric_perp": slice4, "slice_ric_mixed": slice5, "slice_ric_NN": slice6,
        "u_ok": u > u_eps,
    }


_STRUCTURE_KINDS = {
    "ric_TT_minus_NN": ("", False), "ric_TT_minus_NT": ("", False), "ric_rank": ("dd", False),
    "ric_perp": ("dd", False), "scal": ("", False),
    "slice_trD_perp": ("d", True), "slice_div": ("d", True), "slice_hamiltonian": ("", True),
    "slice_ric_perp": ("dd", True), "slice_ric_mixed": ("d", True), "slice_ric_NN": ("", True),
}


def ricci_structure_report(block: SpacetimeBlock, tol_spacetime: float | None = None,
                           tol_slice: float | None = None) -> ResidualReport:
    r = ricci_structure_residuals(block)
    m = block.mask() & r["u_ok"]
    rep = ResidualReport("ricci_structure")
    for name, (kinds, spatial) in _STRUCTURE_KINDS.items():
        tol = tol_slice if spatial else tol_spacetime
        rep.add(ResidualEntry(name, block.norm(r[name], kinds, "linf", m, spatial),
                              block.norm(r[name], kinds, "l2", m, spatial), tol))
    return rep


def ricci_flat_relations(block: SpacetimeBlock) -> dict:
    """Compare Ric̄ with its slice expressions.

    ``hamiltonian``: (scal − |II|² + (tr II)²) − (scal̄ + 2 Ric̄(T,T));
    ``momentum``:    (d tr II + div II)(X) − Ric̄(X, T).
    Both vanish identically for any metric of the block's form.
    """
    geo = block.geometry
    sg = block.slice_geometry
    II = block.second_fundamental_form()
    from .constraints import ricci_flat_constraint_residuals
    ham, mom = ricci_flat_constraint_residuals(sg, II)
    lam = block.lam
    RTT = geo.Ric[0, 0] / lam**2
    RXT = geo.Ric[1:, 0] / lam
    return {"hamiltonian": ham - (geo.scal + 2.0 * RTT), "momentum": mom - RXT,
            "slice_hamiltonian": ham, "slice_momentum": mom}


# --- synthetic blocks ---------------------------------------------------------

def oracle_block(data, times) -> SpacetimeBlock:
    """Block sampled from the closed-form Codazzi solution (λ ≡ 1)."""
    from .evolution import codazzi_closed_form
    sols = [codazzi_closed_form(data, float(t)) for t in times]
    g = np.stack([s["g"] for s in sols], axis=2)
    U = np.stack([s["U"] for s in sols], axis=1)
    u = np.stack([s["u"] for s in sols])
    lam = np.ones_like(u)
    return assemble(data.chart, times, g, U, u, lam)


def _random_trig(rng, coords, periodic, modes: int = 2) -> np.ndarray:
    """Smooth random function built from a few low Fourier modes per axis."""
    out = np.zeros(coords[0].shape)
    for _ in range(3):
        arg = np.zeros(coords[0].shape)
        for x, per in zip(coords, periodic):
            k = int(rng.integers(0, modes + 1)) if per else float(rng.uniform(0.0, 1.5))
            arg = arg + k * x
        out = out + rng.uniform(-1, 1) * np.cos(arg + rng.uniform(0, 2 * np.pi))
    return out / 3.0


def random_smooth_block(spatial: Chart, times, seed: int = 0, amplitude: float = 0.1) -> SpacetimeBlock:
    """A smooth but otherwise arbitrary metric −λ²dt² + g_t (no PDE imposed).

    Spatial dependence uses low Fourier modes so periodic charts stay
    periodic; time dependence is a quadratic polynomial.
    """
    rng = np.random.default_rng(seed)
    times = np.asarray(times, dtype=float)
    n = spatial.dim
    L = times.size
    tt = times.reshape((L,) + (1,) * n)
    per = spatial.periodic
    g = np.zeros((n, n, L) + spatial.shape)
    for i in range(n):
        for j in range(i, n):
            base = 1.0 if i == j else 0.0
            comp = base + amplitude * (_random_trig(rng, spatial.coords, per)
                                       + tt * _random_trig(rng, spatial.coords, per)
                                       + tt**2 * _random_trig(rng, spatial.coords, per))
            g[i, j] = comp
            g[j, i] = comp
    lam = 1.0 + amplitude * (_random_trig(rng, spatial.coords, per) + tt * _random_trig(rng, spatial.coords, per))
    U = np.zeros((n, L) + spatial.shape)
    U[0] = 1.0
    u = np.sqrt(g[0, 0])
    return assemble(spatial, times, g, U, u, lam)
