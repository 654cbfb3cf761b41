"""Command-line front end.

Verbs::

    check        constraint residuals of the generated data (and spin constraints)
    evolve       constraints plus evolution, monitor trace and closed-form oracle
    verify       every check listed in the scenario
    spin         spinor checks (2D only), including the extension when evolving
    convergence  rerun the scenario on a refinement ladder and report orders
    dump-schema  print the scenario schema as JSON

Exit codes: 0 pass, 2 configuration error, 3 constraint violation,
4 evolution abort, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import __version__
from .errors import (AsymmetricW, BadW0Shape, Blowup, ClosednessViolated, ConfigError, ConstraintViolation,
                     DegenerateU, InvalidSpec, NonPositiveWarp, NonZeroMean, ParseError, SignatureError,
                     SingularMetric, StepRejected, ZeroVector)
from .runner import run_convergence, run_pipeline
from .scenario import bundled_scenarios, load_scenario, scenario_schema

log = logging.getLogger("pnvcauchy")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSTRAINT = 3
EXIT_EVOLUTION = 4
EXIT_VERIFY = 5

CONFIG_ERRORS = (ConfigError, InvalidSpec, ParseError, NonZeroMean, BadW0Shape, NonPositiveWarp, ZeroVector)
CONSTRAINT_ERRORS = (ConstraintViolation, ClosednessViolated, AsymmetricW)
EVOLUTION_ERRORS = (Blowup, DegenerateU, StepRejected, SingularMetric, SignatureError)

VERB_CHECKS = {
    "check": ("constraints", "spin"),
    "evolve": ("constraints", "evolve"),
    "verify": None,
    "spin": ("constraints", "spin", "evolve", "spacetime"),
}


def _clean(obj):
    """Replace non-finite floats so the report stays valid JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _select_checks(verb: str, scenario_checks: tuple[str, ...]) -> tuple[str, ...]:
    wanted = VERB_CHECKS[verb]
    if wanted is None:
        return scenario_checks
    if verb == "spin":
        # extend only when the scenario evolves
        return tuple(c for c in wanted if c in ("constraints", "spin") or c in scenario_checks)
    if verb == "check":
        return tuple(c for c in wanted if c == "constraints" or c in scenario_checks)
    return wanted


def run_command(args) -> int:
    sc = load_scenario(args.scenario)
    seed = sc.seed if args.seed is None else args.seed
    out = Path(args.out) if args.out else Path("pnv-out") / sc.name
    out.mkdir(parents=True, exist_ok=True)
    report = {"tool": "pnvcauchy", "version": __version__, "schema_version": 1, "command": args.verb,
              "seed": seed, "scenario": sc.echo()}

    if args.verb == "convergence":
        table = run_convergence(sc, seed=seed)
        report["convergence"] = table.to_dict()
        report["passed"] = table.passed
        code = EXIT_OK if table.passed else EXIT_VERIFY
        with open(out / "convergence.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["residual", "N", "h", "error", "order", "status"])
            for key, errs in table.errors.items():
                orders = [None] + table.orders[key]
                for N, h, e, o in zip(table.ladder, table.spacings, errs, orders):
                    w.writerow([key, N, repr(h), repr(e), "" if o is None else repr(o), table.status[key]])
        for key, status in table.status.items():
            if status == "slow":
                print(f"SLOW  {key}: errors {table.errors[key]} orders {table.orders[key]}")
    else:
        if args.verb == "spin" and sc.dim != 2:
            raise ConfigError(f"the spin verb needs a 2D chart, got dimension {sc.dim}", "chart")
        checks = _select_checks(args.verb, sc.checks)
        res = run_pipeline(sc, checks, seed=seed, out=out)
        report["checks"] = res.to_dict()
        report["passed"] = res.passed
        if res.evolution is not None:
            res.evolution.trace.write_csv(out / "monitor.csv")
        _write_json(out / "timings.json", {"timings": res.timings})
        if res.passed:
            code = EXIT_OK
        elif res.constraint_failure:
            code = EXIT_CONSTRAINT
        else:
            code = EXIT_VERIFY
        for title, rep in res.reports.items():
            for e in rep.entries:
                if not e.passed:
                    print(f"FAIL  {title}.{e.name}: {e.linf:.3e} > {e.tol:.3e}")
    report["exit_code"] = code
    _write_json(out / "report.json", report)
    print(f"{sc.name}: {'PASS' if code == EXIT_OK else 'FAIL'} (exit {code}); report in {out / 'report.json'}")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnvcauchy",
                                description="Cauchy data, evolution and verification for parallel null vectors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_ in (("check", "check the constraints of the generated initial data"),
                        ("evolve", "evolve the data and monitor constraint drift"),
                        ("verify", "run every check listed in the scenario"),
                        ("spin", "spinor constraints and, when evolving, the parallel spinor"),
                        ("convergence", "observed orders on the scenario's refinement ladder")):
        sp = sub.add_parser(verb, help=help_)
        sp.add_argument("--scenario", required=True,
                        help=f"scenario file or bundled name ({', '.join(bundled_scenarios())})")
        sp.add_argument("--out", help="output directory (default: pnv-out/<scenario name>)")
        sp.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomized probes")
        sp.add_argument("-v", "--verbose", action="store_true")
    sp = sub.add_parser("dump-schema", help="print the scenario schema as JSON")
    sp.add_argument("--out", help="write to this file instead of stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb == "dump-schema":
        text = json.dumps(scenario_schema(), indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=args.threads):
            return run_command(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CONSTRAINT_ERRORS as exc:
        print(f"constraint violation: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except EVOLUTION_ERRORS as exc:
        print(f"evolution aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EVOLUTION


if __name__ == "__main__":
    sys.exit(main())
