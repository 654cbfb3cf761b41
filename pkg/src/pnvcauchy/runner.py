"""Execute a scenario: generate data, run the requested checks, collect reports.

The CLI is a thin layer over :func:`run_pipeline` and :func:`run_convergence`.
Tolerances follow two patterns.  Identities that hold for any smooth field
(constraints of exact data, Gauss/Codazzi/Mainardi, slice identities) use
``C·h⁴·scale`` with ``h`` the larger of the spatial spacing and Δt.  Checks
with a fixed absolute target (oracle agreement, ∇̄V, spinor residuals) use
the named entries of the scenario's ``[tolerances]`` table.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chart import ChartSpec, build_chart
from .constraints import constraint_report, data_scale
from .errors import ConfigError
from .evolution import EvolutionResult, SystemKind, codazzi_closed_form, evolve, initial_state, step_count
from .fields import Symmetry, TensorField, component_norms, dump_field
from .initial_data import (LapseField, gen_circle_codazzi, gen_conformal_torus, gen_flat,
                           gen_open_codazzi, gen_warped)
from .report import ResidualEntry, ResidualReport, observed_orders
from .scenario import Scenario
from .spacetime import (MIN_LEVELS, gcm_report, parallel_vector_report, random_smooth_block,
                        ricci_flat_relations, ricci_structure_report)
from .spin import extend_spinor, parallel_spinor_report, spin_connection_3d, spin_report, transport

log = logging.getLogger(__name__)

CODAZZI_ORACLE_GENERATORS = {"flat", "circle_codazzi", "open_codazzi"}
# values at or below this are reported as exact zeros in convergence tables
ORDER_FLOOR = 1e-14
ROUNDING_FACTOR = 1e3

# which failure class a report belongs to: constraint reports map to exit 3,
# everything else to exit 5
CONSTRAINT_REPORTS = {"constraints", "spin_constraints"}


def build_data(sc: Scenario, spec: ChartSpec | None = None):
    chart = build_chart(sc.chart if spec is None else spec)
    lapse = LapseField(sc.lapse)
    p = sc.params
    if sc.generator == "flat":
        return gen_flat(chart, p["U0"], lapse)
    if sc.generator == "circle_codazzi":
        return gen_circle_codazzi(chart, p["w"], lapse)
    if sc.generator == "conformal_torus":
        return gen_conformal_torus(chart, p["sigma"], p.get("a", 1.0), p.get("b", 0.0), p.get("c", 1.0),
                                   p.get("f"), p.get("h"), lapse)
    if sc.generator == "warped":
        return gen_warped(chart, p["h"], lapse)
    if sc.generator == "open_codazzi":
        return gen_open_codazzi(chart, p["nhat"], p["c"], lapse)
    raise ConfigError(f"unknown generator {sc.generator!r}", "generator.kind")


def has_closed_form(sc: Scenario, data) -> bool:
    return (sc.generator in CODAZZI_ORACLE_GENERATORS and data.lapse.is_constant
            and float(data.lapse.expr()) == 1.0 and sc.system != SystemKind.RICCI_FLAT)


@dataclass
class RunResult:
    scenario: Scenario
    data: object
    reports: dict[str, ResidualReport] = field(default_factory=dict)
    evolution: EvolutionResult | None = None
    spinor_block: np.ndarray | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports.values())

    @property
    def constraint_failure(self) -> bool:
        return any(not r.passed for k, r in self.reports.items() if k in CONSTRAINT_REPORTS)

    def to_dict(self) -> dict:
        return {k: r.to_dict() for k, r in self.reports.items()}


def _evolution_report(sc: Scenario, data, res: EvolutionResult, tol_trunc: float) -> ResidualReport:
    """Constraint drift, symmetry monitors and (when available) the closed-form oracle."""
    tol = sc.tolerances
    tr = res.trace
    rep = ResidualReport("evolution")
    pnv = sc.system != SystemKind.RICCI_FLAT
    note = "tolerance: drift_factor × max(t=0 value, C·h⁴·scale)"
    vc, nc = tr.column("vector_constraint"), tr.column("norm_constraint")
    u2 = float(np.max(data.u**2))
    rep.add(ResidualEntry("vector_constraint_final", float(vc[-1]), float(vc[-1]),
                          tol["drift_factor"] * max(float(vc[0]), tol_trunc), enforced=pnv, note=note))
    rep.add(ResidualEntry("norm_constraint_final", float(nc[-1]), float(nc[-1]),
                          tol["drift_factor"] * max(float(nc[0]), tol_trunc * max(1.0, u2)), enforced=pnv, note=note))
    g_asym = float(np.max(tr.column("g_antisym")))
    rep.add(ResidualEntry("g_antisymmetry", g_asym, g_asym, tol["exact"]))
    sym = float(np.max(tr.column("symmetry_defect")))
    rep.add(ResidualEntry("rhs_symmetry_defect", sym, sym, tol["exact"],
                          enforced=sc.system == SystemKind.PNV_B,
                          note="informational for pnv_a, whose metric equation is not symmetric"))
    if has_closed_form(sc, data):
        exact = codazzi_closed_form(data, res.state.t)
        for name, key, nidx in (("oracle_g", "g", 2), ("oracle_U", "U", 1), ("oracle_u", "u", 0)):
            err = getattr(res.state, key) - exact[key]
            rep.add(ResidualEntry(name, *component_norms(err, nidx), tol["oracle"]))
    return rep


def _random_block_times(sc: Scenario, chart) -> np.ndarray:
    dt = sc.time_step(chart.spec) if (sc.dt is not None or sc.cfl is not None) else 0.5 * chart.h
    span = max(1.0, (MIN_LEVELS - 1) * dt)
    n, dt = step_count(span, dt)
    return np.arange(n + 1) * dt


def run_pipeline(sc: Scenario, checks=None, spec: ChartSpec | None = None,
                 seed: int | None = None, out: Path | None = None) -> RunResult:
    """Run ``checks`` (default: the scenario's own list) and return all reports."""
    checks = tuple(sc.checks if checks is None else checks)
    if "spin" in checks and sc.dim != 2:
        raise ConfigError(f"the spin check needs a 2D chart, got dimension {sc.dim}", "checks")
    seed = sc.seed if seed is None else seed
    t0 = time.perf_counter()
    data = build_data(sc, spec)
    chart = data.chart
    result = RunResult(sc, data)
    result.timings["generate"] = time.perf_counter() - t0
    C, tol = sc.tolerances["C"], sc.tolerances
    scale = data_scale(data)

    def trunc(h: float) -> float:
        return C * h**4 * scale

    if "constraints" in checks:
        t = time.perf_counter()
        result.reports["constraints"] = constraint_report(data, C)
        result.timings["constraints"] = time.perf_counter() - t

    if "spin" in checks:
        if data.spinor is None:
            raise ConfigError(f"generator {sc.generator!r} provided no spinor for this data", "checks")
        t = time.perf_counter()
        result.reports["spin_constraints"] = spin_report(chart, data.g, data.spinor, data.W, trunc(chart.h))
        result.timings["spin_constraints"] = time.perf_counter() - t

    if "evolve" in checks:
        if sc.t_end is None:
            raise ConfigError("evolution settings are required for this check", "evolution")
        dt = sc.time_step(chart.spec)
        nsteps, _ = step_count(sc.t_end, dt)
        if "spacetime" in checks and nsteps + 1 < MIN_LEVELS:
            raise ConfigError(f"spacetime checks need at least {MIN_LEVELS} time levels, "
                              f"this run has {nsteps + 1}", "evolution")
        t = time.perf_counter()
        state = initial_state(data)
        res = evolve(sc.system, state, chart, data.lapse, sc.t_end, dt,
                     build_block="spacetime" in checks)
        result.evolution = res
        result.timings["evolve"] = time.perf_counter() - t
        h_eff = max(chart.h, res.dt)
        result.reports["evolution"] = _evolution_report(sc, data, res, trunc(h_eff))

        if "spacetime" in checks:
            t = time.perf_counter()
            block = res.block
            result.reports["parallel_vector"] = parallel_vector_report(block, tol["spacetime"])
            result.reports["gauss_codazzi_mainardi"] = gcm_report(block, trunc(h_eff))
            result.reports["ricci_structure"] = ricci_structure_report(block, tol["spacetime"], trunc(h_eff))
            rel = ricci_flat_relations(block)
            rrep = ResidualReport("ricci_flat_relations")
            m = block.mask()
            for name, kinds in (("hamiltonian", ""), ("momentum", "d")):
                rrep.add(ResidualEntry(name, block.norm(rel[name], kinds, "linf", m, True),
                                       block.norm(rel[name], kinds, "l2", m, True), trunc(h_eff)))
            result.reports["ricci_flat_relations"] = rrep
            result.timings["spacetime"] = time.perf_counter() - t

            if "spin" in checks:
                t = time.perf_counter()
                phi = extend_spinor(block, data.spinor)
                result.spinor_block = phi
                srep = parallel_spinor_report(block, phi, tol["spinor"])
                _, Om = spin_connection_3d(block)
                back = transport(Om[0], phi[:, -1], block.dt, backward=True)
                err = float(np.max(np.abs(back[:, 0] - data.spinor)))
                srep.add(ResidualEntry("back_transport", err, err,
                                       C * block.dt**4 * max(1.0, float(np.max(np.abs(data.spinor))))))
                result.reports["parallel_spinor"] = srep
                result.timings["spin_extension"] = time.perf_counter() - t

    if "random_block" in checks:
        t = time.perf_counter()
        times = _random_block_times(sc, chart)
        rb = random_smooth_block(chart, times, seed=seed)
        h_eff = max(chart.h, rb.dt)
        rep = gcm_report(rb, trunc(h_eff))
        rep.title = "random_block_gcm"
        result.reports["random_block_gcm"] = rep
        result.timings["random_block"] = time.perf_counter() - t

    if out is not None and sc.dump:
        write_dumps(result, Path(out))
    return result


def write_dumps(result: RunResult, out: Path) -> list[Path]:
    """Write the initial and final fields (and the spinor) in the grid dump format."""
    out.mkdir(parents=True, exist_ok=True)
    data = result.data
    spec = data.chart.spec
    written = []

    def put(name, arr, kinds, sym=Symmetry.NONE, metric=False, extra=None):
        p = out / f"{name}.pnvdump"
        dump_field(p, TensorField(spec, np.asarray(arr), kinds, sym, metric), extra)
        written.append(p)

    put("g0", data.g, "dd", Symmetry.SYM2, True)
    put("W0", data.W, "ud")
    put("U0", data.U, "u")
    put("u0", data.u, "")
    if data.spinor is not None:
        put("phi0", data.spinor, "", extra={"kind": "spinor"})
    if result.evolution is not None:
        st = result.evolution.state
        put("g_final", st.g, "dd", Symmetry.SYM2, True, {"t": st.t})
        put("U_final", st.U, "u", extra={"t": st.t})
        put("u_final", st.u, "", extra={"t": st.t})
    if result.spinor_block is not None:
        put("phi_final", result.spinor_block[:, -1], "", extra={"kind": "spinor", "t": result.evolution.state.t})
    return written


def rounding_floor(h: float) -> float:
    """Error level below which a residual is treated as pure rounding on spacing h."""
    return max(ORDER_FLOOR, ROUNDING_FACTOR * np.finfo(float).eps / h**2)


@dataclass
class ConvergenceTable:
    ladder: tuple[int, ...]
    spacings: list[float]
    errors: dict[str, list[float]]
    orders: dict[str, list[float | None]]
    status: dict[str, str]
    min_order: float

    @property
    def passed(self) -> bool:
        return all(s in ("converged", "exact", "at_floor", "informational") for s in self.status.values())

    def to_dict(self) -> dict:
        rows = []
        for key in self.errors:
            rows.append({"residual": key, "errors": self.errors[key], "orders": self.orders[key],
                         "status": self.status[key]})
        return {"ladder": list(self.ladder), "spacings": self.spacings, "min_order": self.min_order,
                "passed": self.passed, "rows": rows}


def run_convergence(sc: Scenario, checks=None, ladder=None, seed: int | None = None) -> ConvergenceTable:
    """Rerun the pipeline on each ladder grid and measure observed orders.

    Status per residual: ``informational`` when its entry is not enforced,
    ``exact`` when every rung is at the rounding floor, ``at_floor`` when the
    finest rung is (the floor grows like ε/h² because second-derivative
    stencils amplify roundoff), ``converged`` when the order measured on the finest pair
    is at least ``min_order``, and ``slow`` otherwise.  Coarse pairs are
    reported but not judged, since they may be pre-asymptotic.
    """
    ladder = tuple(sc.ladder if ladder is None else ladder)
    errors: dict[str, list[float]] = {}
    enforced: dict[str, bool] = {}
    spacings = []
    for N in ladder:
        rung = sc.with_points(N)
        res = run_pipeline(rung, checks, seed=seed)
        spacings.append(res.data.chart.h)
        for title, rep in res.reports.items():
            for e in rep.entries:
                key = f"{title}.{e.name}"
                errors.setdefault(key, []).append(float(e.linf))
                enforced[key] = enforced.get(key, True) and e.enforced
    orders, status = {}, {}
    floors = [rounding_floor(h) for h in spacings]
    for key, errs in errors.items():
        orders[key] = observed_orders(errs, spacings)
        if not enforced[key]:
            status[key] = "informational"
        elif all(e <= f for e, f in zip(errs, floors)):
            status[key] = "exact"
        elif errs[-1] <= floors[-1]:
            status[key] = "at_floor"
        elif orders[key][-1] is not None and orders[key][-1] >= sc.min_order:
            status[key] = "converged"
        else:
            status[key] = "slow"
    return ConvergenceTable(ladder, spacings, errors, orders, status, sc.min_order)
