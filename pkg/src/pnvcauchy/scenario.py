"""Scenario files: a versioned TOML description of one pipeline run.

A scenario names a generator and its parameters, the chart, the lapse, the
evolution settings, tolerance constants and the checks to perform.  Numbers
may be written as TOML numbers or as constant expressions such as
``"2*pi/256"``.  Loading validates everything up front and reports problems
as :class:`ConfigError` with a dotted location.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli

from .chart import ChartSpec, build_chart, make_spec
from .errors import ConfigError, InvalidSpec, ParseError
from .evolution import SystemKind
from .expr import Expr

SCHEMA_VERSION = 1
CHECKS = ("constraints", "evolve", "spacetime", "spin", "random_block")
GENERATORS = {
    "flat": {"required": {"U0"}, "optional": set()},
    "circle_codazzi": {"required": {"w"}, "optional": set()},
    "conformal_torus": {"required": {"sigma"}, "optional": {"a", "b", "c", "f", "h"}},
    "warped": {"required": {"h"}, "optional": set()},
    "open_codazzi": {"required": {"nhat", "c"}, "optional": set()},
}
TOP_LEVEL = {"schema_version", "name", "description", "checks", "seed", "chart", "generator",
             "lapse", "evolution", "tolerances", "convergence", "output"}
DEFAULT_TOLERANCES = {"C": 100.0, "drift_factor": 10.0, "oracle": 1e-6, "spacetime": 1e-4,
                      "spinor": 1e-4, "exact": 1e-12}


def _number(value, loc: str) -> float:
    if isinstance(value, bool):
        raise ConfigError("expected a number, got a boolean", loc)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            e = Expr(value)
        except ParseError as exc:
            raise ConfigError(f"bad expression: {exc}", loc) from exc
        if e.variables:
            raise ConfigError(f"expression must be constant, uses {sorted(e.variables)}", loc)
        return float(e())
    raise ConfigError(f"expected a number, got {type(value).__name__}", loc)


def _expr(value, loc: str) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(float(value))
    if not isinstance(value, str):
        raise ConfigError("expected an expression string", loc)
    try:
        Expr(value)
    except ParseError as exc:
        raise ConfigError(f"bad expression: {exc}", loc) from exc
    return value


def _table(raw: dict, key: str, required: bool = True) -> dict:
    if key not in raw:
        if required:
            raise ConfigError("missing table", key)
        return {}
    if not isinstance(raw[key], dict):
        raise ConfigError("expected a table", key)
    return raw[key]


def _unknown(tab: dict, allowed: set, prefix: str) -> None:
    for k in tab:
        if k not in allowed:
            raise ConfigError("unknown key", f"{prefix}.{k}" if prefix else k)


@dataclass
class Scenario:
    name: str
    chart: ChartSpec
    generator: str
    params: dict
    lapse: str = "1"
    system: SystemKind = SystemKind.PNV_B
    t_end: float | None = None
    dt: float | None = None
    cfl: float | None = None
    checks: tuple[str, ...] = ("constraints",)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    ladder: tuple[int, ...] = (32, 64, 128)
    min_order: float = 3.5
    seed: int = 0
    dump: bool = False
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def time_step(self, spec: ChartSpec | None = None) -> float:
        """Δt from an explicit value, or cfl·h on the given chart."""
        spec = self.chart if spec is None else spec
        if self.cfl is not None:
            return self.cfl * build_chart(spec).h
        return float(self.dt)

    def with_points(self, points: int) -> "Scenario":
        """Same scenario on a grid with ``points`` nodes per axis.

        Explicit Δt values are scaled with h so that Δt ∝ h along a ladder.
        """
        new = copy.copy(self)
        ratio = self.chart.points[0] / points
        new.chart = make_spec(self.chart.extents, [points] * self.dim, self.chart.boundary)
        if self.dt is not None and self.cfl is None:
            new.dt = self.dt * ratio
        return new

    def echo(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION, "name": self.name, "description": self.description,
            "chart": self.chart.to_dict(), "generator": {"kind": self.generator, **self.params},
            "lapse": self.lapse, "system": self.system.value, "t_end": self.t_end, "dt": self.dt,
            "cfl": self.cfl, "checks": list(self.checks), "tolerances": self.tolerances,
            "ladder": list(self.ladder), "min_order": self.min_order, "seed": self.seed,
        }


def parse_scenario(raw: dict, source: str = "<scenario>") -> Scenario:
    _unknown(raw, TOP_LEVEL, "")
    if "schema_version" not in raw:
        raise ConfigError("missing schema_version", "schema_version")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {raw['schema_version']!r} (expected {SCHEMA_VERSION})",
                          "schema_version")
    name = raw.get("name", Path(source).stem)
    if not isinstance(name, str) or not name:
        raise ConfigError("expected a non-empty string", "name")

    # chart
    ch = _table(raw, "chart")
    _unknown(ch, {"extents", "points", "boundary"}, "chart")
    for k in ("extents", "points", "boundary"):
        if k not in ch:
            raise ConfigError("missing key", f"chart.{k}")
    if not isinstance(ch["extents"], list) or not ch["extents"]:
        raise ConfigError("expected a list of [a, b] pairs", "chart.extents")
    extents = []
    for i, pair in enumerate(ch["extents"]):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError("expected [a, b]", f"chart.extents[{i}]")
        extents.append((_number(pair[0], f"chart.extents[{i}][0]"), _number(pair[1], f"chart.extents[{i}][1]")))
    dim = len(extents)
    points = ch["points"] if isinstance(ch["points"], list) else [ch["points"]] * dim
    bnd = ch["boundary"] if isinstance(ch["boundary"], list) else [ch["boundary"]] * dim
    for i, p in enumerate(points):
        if not isinstance(p, int) or isinstance(p, bool):
            raise ConfigError("expected an integer", f"chart.points[{i}]")
    for i, b in enumerate(bnd):
        if b not in ("periodic", "open"):
            raise ConfigError("expected 'periodic' or 'open'", f"chart.boundary[{i}]")
    if len(points) != dim or len(bnd) != dim:
        raise ConfigError("points/boundary length does not match extents", "chart")
    try:
        spec = make_spec(extents, points, bnd)
        build_chart(spec)
    except InvalidSpec as exc:
        raise ConfigError(str(exc), "chart") from exc

    # generator
    gen = dict(_table(raw, "generator"))
    kind = gen.pop("kind", None)
    if kind not in GENERATORS:
        raise ConfigError(f"unknown generator {kind!r}; expected one of {sorted(GENERATORS)}", "generator.kind")
    allowed = GENERATORS[kind]["required"] | GENERATORS[kind]["optional"]
    _unknown(gen, allowed, "generator")
    for k in GENERATORS[kind]["required"]:
        if k not in gen:
            raise ConfigError("missing parameter", f"generator.{k}")
    params = {}
    for k, v in gen.items():
        loc = f"generator.{k}"
        if k in ("U0", "nhat"):
            if not isinstance(v, list) or len(v) != dim:
                raise ConfigError(f"expected a list of {dim} numbers", loc)
            params[k] = [_number(x, f"{loc}[{i}]") for i, x in enumerate(v)]
        elif k in ("a", "b", "c"):
            params[k] = _number(v, loc)
        else:
            params[k] = _expr(v, loc)

    # lapse
    lapse = "1"
    if "lapse" in raw:
        lt = raw["lapse"]
        if isinstance(lt, dict):
            _unknown(lt, {"expr"}, "lapse")
            lapse = _expr(lt.get("expr", "1"), "lapse.expr")
        else:
            lapse = _expr(lt, "lapse")

    # checks
    checks = raw.get("checks", ["constraints"])
    if not isinstance(checks, list):
        raise ConfigError("expected a list", "checks")
    for i, c in enumerate(checks):
        if c not in CHECKS:
            raise ConfigError(f"unknown check {c!r}; expected one of {list(CHECKS)}", f"checks[{i}]")
    if "spin" in checks and dim != 2:
        raise ConfigError(f"the spin check needs a 2D chart, got dimension {dim}", "checks")
    if "spacetime" in checks and "evolve" not in checks:
        raise ConfigError("the spacetime check needs 'evolve' in checks", "checks")

    # evolution
    ev = _table(raw, "evolution", required="evolve" in checks)
    _unknown(ev, {"system", "t_end", "dt", "cfl"}, "evolution")
    system = SystemKind.PNV_B
    t_end = dt = cfl = None
    if ev:
        try:
            system = SystemKind(ev.get("system", "pnv_b"))
        except ValueError as exc:
            raise ConfigError(f"unknown system {ev.get('system')!r}", "evolution.system") from exc
        if "t_end" not in ev:
            raise ConfigError("missing key", "evolution.t_end")
        t_end = _number(ev["t_end"], "evolution.t_end")
        if not t_end > 0:
            raise ConfigError("must be positive", "evolution.t_end")
        if ("dt" in ev) == ("cfl" in ev):
            raise ConfigError("give exactly one of dt or cfl", "evolution")
        if "dt" in ev:
            dt = _number(ev["dt"], "evolution.dt")
            if not dt > 0:
                raise ConfigError("must be positive", "evolution.dt")
        else:
            cfl = _number(ev["cfl"], "evolution.cfl")
            if not cfl > 0:
                raise ConfigError("must be positive", "evolution.cfl")

    # tolerances
    tol = dict(DEFAULT_TOLERANCES)
    tt = _table(raw, "tolerances", required=False)
    _unknown(tt, set(DEFAULT_TOLERANCES), "tolerances")
    for k, v in tt.items():
        tol[k] = _number(v, f"tolerances.{k}")
        if not tol[k] > 0:
            raise ConfigError("must be positive", f"tolerances.{k}")

    # convergence
    cv = _table(raw, "convergence", required=False)
    _unknown(cv, {"ladder", "min_order"}, "convergence")
    ladder = cv.get("ladder", [32, 64, 128])
    if not isinstance(ladder, list) or len(ladder) < 2 or not all(isinstance(n, int) and n >= 8 for n in ladder):
        raise ConfigError("expected a list of at least two grid sizes >= 8", "convergence.ladder")
    min_order = _number(cv.get("min_order", 3.5), "convergence.min_order")

    out = _table(raw, "output", required=False)
    _unknown(out, {"dump"}, "output")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("expected an unsigned 64-bit integer", "seed")

    return Scenario(name=name, chart=spec, generator=kind, params=params, lapse=lapse, system=system,
                    t_end=t_end, dt=dt, cfl=cfl, checks=tuple(checks), tolerances=tol,
                    ladder=tuple(ladder), min_order=min_order, seed=seed,
                    dump=bool(out.get("dump", False)), description=str(raw.get("description", "")),
                    raw=raw)


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario from a file path or from a bundled scenario name."""
    p = Path(path)
    if not p.exists():
        bundled = resources.files("pnvcauchy.scenarios").joinpath(f"{path}.toml")
        if not bundled.is_file():
            raise ConfigError(f"no such scenario file or bundled scenario: {path}", "--scenario")
        text, source = bundled.read_text(), str(path)
    else:
        text, source = p.read_text(), str(p)
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}", source) from exc
    return parse_scenario(raw, source)


def bundled_scenarios() -> list[str]:
    root = resources.files("pnvcauchy.scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def scenario_schema() -> dict:
    """A JSON-schema style description of the scenario format."""
    num = {"oneOf": [{"type": "number"}, {"type": "string", "description": "constant expression"}]}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "pnvcauchy scenario",
        "type": "object",
        "required": ["schema_version", "chart", "generator"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "name": {"type": "string"},
            "description": {"type": "string"},
            "seed": {"type": "integer", "minimum": 0},
            "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
            "chart": {"type": "object", "required": ["extents", "points", "boundary"], "properties": {
                "extents": {"type": "array", "items": {"type": "array", "items": num, "minItems": 2, "maxItems": 2}},
                "points": {"oneOf": [{"type": "integer", "minimum": 8},
                                     {"type": "array", "items": {"type": "integer", "minimum": 8}}]},
                "boundary": {"oneOf": [{"enum": ["periodic", "open"]},
                                       {"type": "array", "items": {"enum": ["periodic", "open"]}}]}}},
            "generator": {"type": "object", "required": ["kind"], "properties": {
                "kind": {"enum": sorted(GENERATORS)}},
                "description": "remaining keys are generator parameters: "
                               + "; ".join(f"{k}: {sorted(v['required'])} + optional {sorted(v['optional'])}"
                                           for k, v in GENERATORS.items())},
            "lapse": {"type": "object", "properties": {"expr": {"type": "string"}}},
            "evolution": {"type": "object", "required": ["t_end"], "properties": {
                "system": {"enum": [s.value for s in SystemKind]}, "t_end": num, "dt": num, "cfl": num}},
            "tolerances": {"type": "object", "properties": {k: num for k in DEFAULT_TOLERANCES}},
            "convergence": {"type": "object", "properties": {
                "ladder": {"type": "array", "items": {"type": "integer", "minimum": 8}}, "min_order": num}},
            "output": {"type": "object", "properties": {"dump": {"type": "boolean"}}},
        },
    }
