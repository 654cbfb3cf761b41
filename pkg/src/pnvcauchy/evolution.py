"""Method-of-lines integration of the second-order evolution systems.

Unknowns are (g, k = ∂_t g, U, P = ∂_t U, u, v = ∂_t u) on a fixed spatial
chart.  Three right-hand sides are available:

``RICCI_FLAT``
    vacuum evolution of the slice metric for ``−λ²dt² + g_t``; U and u are
    carried along with zero acceleration.
``PNV_A``
    the null-vector system whose metric equation is not manifestly
    symmetric; its antisymmetric part is recorded as the symmetry defect and
    then discarded.
``PNV_B``
    the symmetrized null-vector system.

Time stepping is classical RK4 with a fixed step.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .chart import interior_mask
from .errors import Blowup, ConstraintViolation, DegenerateU, InvalidSpec, SingularMetric, StepRejected
from .fields import antisymmetric_part, component_norms, field_norm, metric_inverse, min_eigenvalue, symmetrize
from .geometry import build_geometry, trace

log = logging.getLogger(__name__)

BLOWUP_FACTOR = 1e12
DEGENERATE_U_FRACTION = 1e-8


class SystemKind(str, Enum):
    RICCI_FLAT = "ricci_flat"
    PNV_A = "pnv_a"
    PNV_B = "pnv_b"


@dataclass
class EvolutionState:
    t: float
    g: np.ndarray
    k: np.ndarray
    U: np.ndarray
    P: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.g, self.k, self.U, self.P, self.u, self.v

    def copy(self) -> "EvolutionState":
        return EvolutionState(self.t, *(a.copy() for a in self.arrays()))


@dataclass
class RHS:
    gdd: np.ndarray
    Udd: np.ndarray
    udd: np.ndarray
    # antisymmetric part of the metric equation before symmetrization
    antisym: np.ndarray


def initial_state(data, check: bool = False, C: float | None = None) -> EvolutionState:
    """Initial values g, −2λII, U, u grad λ + λW(U), u, dλ(U) at t = 0."""
    if check:
        from .constraints import DEFAULT_C, constraint_report
        rep = constraint_report(data, DEFAULT_C if C is None else C)
        if not rep.passed:
            bad = [e.name for e in rep.entries if not e.passed]
            raise ConstraintViolation(f"initial data violate constraints: {', '.join(bad)}")
    chart = data.chart
    lam = data.lapse.values(chart, 0.0)
    dlam = chart.grad(lam) if not data.lapse.is_constant else np.zeros((chart.dim,) + chart.shape)
    ginv = metric_inverse(data.g)
    grad_lam = np.einsum("ij...,j...->i...", ginv, dlam)
    WU = np.einsum("ab...,b...->a...", data.W, data.U)
    return EvolutionState(
        0.0,
        data.g.copy(),
        -2.0 * lam * data.II,
        data.U.copy(),
        data.u * grad_lam + lam * WU,
        data.u.copy(),
        np.einsum("i...,i...->...", dlam, data.U),
    )


def rhs(kind: SystemKind, state: EvolutionState, chart, ls, u_floor: float = 0.0) -> RHS:
    """Second time derivatives (g̈, Ü, ü) for the chosen system.

    ``ls`` is a :class:`~pnvcauchy.initial_data.LapseSample` at ``state.t``.
    """
    kind = SystemKind(kind)
    g, k, U, P, u, v = state.arrays()
    geo = build_geometry(chart, g)
    ginv = geo.ginv
    lam = ls.lam
    dtlog = ls.dt / lam
    H = ls.dd - np.einsum("kij...,k...->ij...", geo.G, ls.d)          # Hess λ
    kk = np.einsum("xa...,ab...,by...->xy...", k, ginv, k)               # k(X, k♯Y)

    if kind is SystemKind.RICCI_FLAT:
        gdd = (dtlog - 0.5 * trace(k, ginv)) * k + kk + 2.0 * lam * H - 2.0 * lam**2 * geo.Ric
        zero = np.zeros_like(gdd)
        return RHS(symmetrize(gdd), np.zeros_like(U), np.zeros_like(u), zero)

    if np.min(u) <= u_floor:
        raise DegenerateU(f"min u = {np.min(u):.3e} fell below {u_floor:.3e}")

    D = geo.dnabla(k / lam)
    DU = np.einsum("i...,ixy...->xy...", U, D)                          # D(U, X, Y)
    lam2u = lam**2 / u
    common = 0.5 * kk + dtlog * k + 2.0 * lam * H
    if kind is SystemKind.PNV_A:
        gdd = lam2u * np.swapaxes(DU, 0, 1) + common
    else:
        Rm = geo.Rm
        RUU = np.einsum("xbcy...,b...,c...->xy...", Rm, U, U)          # R(X, U, U, Y)
        kU = np.einsum("xy...,y...->x...", k, U)
        kUU = np.einsum("x...,x...->...", kU, U)
        gdd = (lam2u * (DU + np.swapaxes(DU, 0, 1)) + common
               + (lam**2 / u**2) * (RUU + np.swapaxes(RUU, 0, 1))
               + (0.5 / u**2) * (k * kUU - np.einsum("x...,y...->xy...", kU, kU)))
    antisym = antisymmetric_part(gdd)
    gdd = symmetrize(gdd)

    grad_lam = np.einsum("ij...,j...->i...", ginv, ls.d)
    dginv = -np.einsum("ia...,ab...,bj...->ij...", ginv, k, ginv)
    comm = np.einsum("ij...,j...->i...", dginv, ls.d) + np.einsum("ij...,j...->i...", ginv, ls.dtd)
    dlamU = np.einsum("i...,i...->...", ls.d, U)
    kP = np.einsum("xy...,y...->x...", k, P)
    DUXU = np.einsum("xy...,y...->x...", DU, U)                       # D(U, X, U)
    HU = np.einsum("xy...,y...->x...", H, U)
    kgl = np.einsum("xy...,y...->x...", k, grad_lam)
    rhs_low = (-0.5 * lam2u * DUXU
               - 0.5 * dtlog * np.einsum("xy...,y...->x...", k, U)
               - lam * HU
               - kP
               + u * np.einsum("xy...,y...->x...", g, comm)
               + 0.5 * u * kgl
               + (2.0 * v - dlamU) * ls.d)
    Udd = np.einsum("ij...,j...->i...", ginv, rhs_low)
    udd = (np.einsum("i...,ij...,j...->...", comm, g, U)
           + 2.0 * np.einsum("i...,i...->...", ls.d, P)
           + 1.5 * np.einsum("i...,i...->...", kgl, U)
           - u * np.einsum("i...,i...->...", grad_lam, ls.d))
    return RHS(gdd, Udd, udd, antisym)


@dataclass
class StageRecord:
    """Per-step maxima of the symmetry monitors.

    With ``keep`` set, every RK stage's input state and the antisymmetric
    part of its metric equation are stored in ``stages`` as well.
    """

    max_antisym: float = 0.0
    max_g_asym: float = 0.0
    keep: bool = False
    stages: list = field(default_factory=list)


def _derivs(kind, state, chart, lapse, u_floor, rec: StageRecord):
    ls = lapse.sample(chart, state.t)
    r = rhs(kind, state, chart, ls, u_floor)
    rec.max_antisym = max(rec.max_antisym, float(np.max(np.abs(r.antisym))))
    if rec.keep:
        rec.stages.append((state.copy(), r.antisym.copy()))
    return (state.k, r.gdd, state.P, r.Udd, state.v, r.udd)


def _advance(state: EvolutionState, d, h: float, rec: StageRecord) -> EvolutionState:
    arrs = [a + h * da for a, da in zip(state.arrays(), d)]
    for i in (0, 1):
        rec.max_g_asym = max(rec.max_g_asym, float(np.max(np.abs(antisymmetric_part(arrs[i])))))
        arrs[i] = symmetrize(arrs[i])
    return EvolutionState(state.t + h, *arrs)


def _validate(state: EvolutionState, stage: str):
    try:
        metric_inverse(state.g)
    except SingularMetric as exc:
        raise StepRejected(f"metric lost positive definiteness at {stage}: {exc}") from exc
    if np.min(state.u) <= 0:
        raise StepRejected(f"u became non-positive at {stage}")
    if not all(np.all(np.isfinite(a)) for a in state.arrays()):
        raise StepRejected(f"non-finite values at {stage}")


def rk4_step(kind, state: EvolutionState, dt: float, chart, lapse, u_floor: float = 0.0,
             rec: StageRecord | None = None) -> EvolutionState:
    """One classical RK4 step; g and k are re-symmetrized after every stage."""
    if dt <= 0:
        raise InvalidSpec("time step must be positive")
    rec = rec if rec is not None else StageRecord()
    kind = SystemKind(kind)
    k1 = _derivs(kind, state, chart, lapse, u_floor, rec)
    s2 = _advance(state, k1, 0.5 * dt, rec)
    _validate(s2, "stage 2")
    k2 = _derivs(kind, s2, chart, lapse, u_floor, rec)
    s3 = _advance(state, k2, 0.5 * dt, rec)
    _validate(s3, "stage 3")
    k3 = _derivs(kind, s3, chart, lapse, u_floor, rec)
    s4 = _advance(state, k3, dt, rec)
    _validate(s4, "stage 4")
    k4 = _derivs(kind, s4, chart, lapse, u_floor, rec)
    comb = [(a + 2.0 * b + 2.0 * c + d) / 6.0 for a, b, c, d in zip(k1, k2, k3, k4)]
    out = _advance(state, comb, dt, rec)
    out.t = state.t + dt
    _validate(out, "step end")
    return out


# --- monitors ---------------------------------------------------------------

def weingarten_of(state: EvolutionState, lam: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """W_t = −(2λ)⁻¹ g⁻¹ k."""
    return -np.einsum("ac...,cb...->ab...", ginv, state.k) / (2.0 * lam)


def vector_constraint_at(state: EvolutionState, chart, lam: np.ndarray) -> tuple[np.ndarray, object]:
    geo = build_geometry(chart, state.g)
    W = weingarten_of(state, lam, geo.ginv)
    return np.swapaxes(geo.nabla(state.U, "u"), 0, 1) + state.u * W, geo


def norm_constraint_at(state: EvolutionState) -> np.ndarray:
    return np.einsum("i...,ij...,j...->...", state.U, state.g, state.U) - state.u**2


MONITOR_COLUMNS = ("step", "t", "vector_constraint", "norm_constraint", "symmetry_defect",
                   "g_antisym", "min_u", "min_eig_g")


@dataclass
class MonitorTrace:
    records: list[dict] = field(default_factory=list)

    def append(self, rec: dict):
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=MONITOR_COLUMNS)
            w.writeheader()
            for r in self.records:
                w.writerow({c: (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in MONITOR_COLUMNS})


def monitor_record(step: int, state: EvolutionState, chart, lapse, mask, symmetry_defect: float,
                   g_asym: float) -> dict:
    lam = lapse.values(chart, state.t)
    vc, geo = vector_constraint_at(state, chart, lam)
    return {
        "step": step,
        "t": float(state.t),
        "vector_constraint": field_norm(vc, geo.g, geo.ginv, "ud", "linf", mask),
        "norm_constraint": component_norms(norm_constraint_at(state), 0, mask)[0],
        "symmetry_defect": float(symmetry_defect),
        "g_antisym": float(g_asym),
        "min_u": float(np.min(state.u)),
        "min_eig_g": min_eigenvalue(state.g),
    }


@dataclass
class EvolutionResult:
    state: EvolutionState
    history: list[EvolutionState]
    trace: MonitorTrace
    dt: float
    steps: int
    wall_time: float
    block: object = None
    stages: list = field(default_factory=list)


def step_count(t_end: float, dt: float) -> tuple[int, float]:
    """Number of steps and the uniform step that lands exactly on ``t_end``."""
    if t_end <= 0 or dt <= 0:
        raise InvalidSpec("t_end and dt must be positive")
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return n, t_end / n


def evolve(kind, state: EvolutionState, chart, lapse, t_end: float, dt: float,
           monitors: bool = True, mask_width: int = 2, build_block: bool = True,
           keep_stages: bool = False) -> EvolutionResult:
    """Integrate from ``state.t`` to ``state.t + t_end`` storing every level.

    ``dt`` is reduced if needed so that the levels are uniformly spaced and
    the last one is exactly at ``t_end``.  ``keep_stages`` stores every RK
    stage state with the antisymmetric part of its metric equation.
    """
    kind = SystemKind(kind)
    nsteps, dt = step_count(t_end, dt)
    u_floor = DEGENERATE_U_FRACTION * float(np.min(state.u))
    scale0 = {i: max(1.0, float(np.max(np.abs(a)))) for i, a in enumerate(state.arrays())}
    mask = interior_mask(chart, mask_width)
    trace_ = MonitorTrace()
    history = [state.copy()]
    stages = []
    t0 = time.perf_counter()
    if monitors:
        ls = lapse.sample(chart, state.t)
        r0 = rhs(kind, state, chart, ls, u_floor)
        trace_.append(monitor_record(0, state, chart, lapse, mask, float(np.max(np.abs(r0.antisym))), 0.0))
    cur = state
    for step in range(1, nsteps + 1):
        rec = StageRecord(keep=keep_stages)
        cur = rk4_step(kind, cur, dt, chart, lapse, u_floor, rec)
        cur.t = state.t + step * dt
        for i, a in enumerate(cur.arrays()):
            if float(np.max(np.abs(a))) > BLOWUP_FACTOR * scale0[i]:
                raise Blowup(f"field {i} exceeded {BLOWUP_FACTOR:g} times its initial size at t={cur.t:.4g}")
        history.append(cur.copy())
        stages.extend(rec.stages)
        if monitors:
            trace_.append(monitor_record(step, cur, chart, lapse, mask, rec.max_antisym, rec.max_g_asym))
    wall = time.perf_counter() - t0
    res = EvolutionResult(cur, history, trace_, dt, nsteps, wall, stages=stages)
    if build_block:
        from .spacetime import assemble_from_history
        res.block = assemble_from_history(chart, history, lapse)
    return res


# --- closed-form Codazzi solution --------------------------------------------

def codazzi_closed_form(data, t: float) -> dict:
    """Exact solution for Codazzi W and λ ≡ 1.

    g_t = g((1 − tW)²·, ·), U_t = (1 − tW)⁻¹U, u_t = u, W_t = W(1 − tW)⁻¹,
    valid while t·|W| < 1.
    """
    if not (data.lapse.is_constant and float(data.lapse.expr()) == 1.0):
        raise InvalidSpec("closed-form solution requires lapse 1")
    n = data.dim
    Wm = np.moveaxis(data.W, (0, 1), (-2, -1))
    I = np.eye(n)
    M = I - t * Wm
    Minv = np.linalg.inv(M)
    gm = np.moveaxis(data.g, (0, 1), (-2, -1))
    gt = np.swapaxes(M, -1, -2) @ gm @ M
    Wt = Wm @ Minv
    Ut = np.einsum("...ab,b...->a...", Minv, data.U)
    Wdot = Wm @ Minv @ Minv       # d/dt U_t = W(1 − tW)⁻² U
    Pt = np.einsum("...ab,b...->a...", Wdot, data.U)
    kt = -2.0 * (gm @ Wm @ M)
    back = lambda a: np.moveaxis(a, (-2, -1), (0, 1))  # noqa: E731
    return {
        "g": symmetrize(back(gt)),
        "k": symmetrize(back(kt)),
        "U": Ut,
        "P": Pt,
        "u": data.u.copy(),
        "W": back(Wt),
        "gdd": symmetrize(back(2.0 * gm @ Wm @ Wm)),
    }
