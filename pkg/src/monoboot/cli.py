"""Command-line interface: ``monoboot {estimate, ci, simulate}``.

Machine-readable JSON goes to stdout and human-readable text to stderr.
Exit codes: 0 success, 2 usage or parse errors, 3 estimator-domain errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings

import numpy as np

from .bootstrap_engine import BootstrapPlan, WeightScheme, ci_for_model
from .errors import BoundaryEvaluation, MonobootError, StepOutOfDomain
from .estimators import KINDS, build_model, generalized_grenander
from .gcm_core import DEFAULT_GRID_POINTS
from .mc_harness import SimConfig, emit_report, run_simulation, summary_lines
from .mean_function import QMode

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3

SCHEMAS = {
    "density": ("x",),
    "isoreg": ("x", "y"),
    "censored_density": ("time", "status"),
    "hazard": ("time", "status"),
    "current_status": ("c", "delta"),
}
BINARY_COLUMNS = ("status", "delta")


class UsageError(Exception):
    """Bad flags, files or file contents."""


def read_dataset(path: str, kind: str) -> dict[str, np.ndarray]:
    """Read the columns required by ``kind`` from a CSV file with a header."""
    cols = SCHEMAS[kind]
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise UsageError(f"{path}: empty file")
            missing = [c for c in cols if c not in reader.fieldnames]
            if missing:
                raise UsageError(f"{path}: missing columns {missing}")
            rows = list(reader)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    data = {}
    for c in cols:
        try:
            v = np.array([float(r[c]) for r in rows], dtype=float)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{path}: non-numeric value in column {c!r}") from exc
        if not np.all(np.isfinite(v)):
            raise UsageError(f"{path}: non-finite value in column {c!r}")
        if c in BINARY_COLUMNS and not np.all((v == 0) | (v == 1)):
            raise UsageError(f"{path}: column {c!r} must be 0 or 1")
        data[c] = v
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return data


def _parse_step(text: str):
    if text == "rot":
        return "rot"
    if text.startswith("fixed:"):
        try:
            eps = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad step {text!r}") from exc
        if not eps > 0:
            raise UsageError("fixed step must be positive")
        return eps
    raise UsageError(f"step must be 'rot' or 'fixed:<eps>', got {text!r}")


def _parse_q(text: str, qbar: int) -> QMode:
    try:
        if text == "robust":
            return QMode.robust(qbar)
        return QMode.known(int(text))
    except ValueError as exc:
        raise UsageError(f"bad exponent setting: {exc}") from exc


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def cmd_estimate(args) -> int:
    data = read_dataset(args.input, args.kind)
    model = build_model(args.kind, data, args.x)
    theta = generalized_grenander(model, args.grid)
    _emit({"theta_hat": theta, "n": model.n, "kind": args.kind, "x": args.x})
    return EXIT_OK


def cmd_ci(args) -> int:
    q_mode = _parse_q(args.q, args.qbar)
    step = _parse_step(args.step)
    if args.bootstrap == "moon" and q_mode.kind != "known":
        raise UsageError("--bootstrap moon needs a known convergence rate; pass --q <odd int>")
    if args.m is not None and args.bootstrap != "moon":
        raise UsageError("--m only applies to --bootstrap moon")
    data = read_dataset(args.input, args.kind)
    model = build_model(args.kind, data, args.x)
    m = args.m if args.m is not None else math.ceil(math.sqrt(model.n))
    mode = {"reshaped": "reshaped", "naive": "naive", "moon": "m_of_n"}[args.bootstrap]
    try:
        plan = BootstrapPlan(B=args.B, scheme=WeightScheme(args.weights), mode=mode, q_mode=q_mode,
                             step=step, alpha=args.alpha, seed=args.seed, grid_points=args.grid,
                             m=m if mode == "m_of_n" else None)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = ci_for_model(model, plan)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _emit({
        "theta_hat": res.theta_hat, "ci_lo": res.lo, "ci_hi": res.hi, "alpha": res.alpha,
        "B": args.B, "seed": args.seed, "bootstrap": args.bootstrap, "kind": args.kind,
        "x": args.x, "n": model.n,
        "d_estimates": {str(k): v for k, v in sorted(res.d_estimates.items())},
        "steps": {str(k): v for k, v in sorted(res.steps.items())},
    })
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
        config = SimConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config {args.config}: {exc}") from exc
    report = run_simulation(config, args.workers)
    text = emit_report(report, args.format)
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from exc
    for line in summary_lines(report):
        print(line, file=sys.stderr)
    print(f"simulation took {report.timing['seconds']:.1f}s with {report.timing['workers']} "
          "worker(s)", file=sys.stderr)
    _emit({"out": args.out, "format": args.format, "rows": report.rows})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monoboot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp):
        sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--kind", required=True, choices=KINDS)
        sp.add_argument("--x", required=True, type=float, help="evaluation point")
        sp.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS,
                        help="refinement grid for continuous composites")

    est = sub.add_parser("estimate", help="point estimate at one location")
    data_flags(est)
    est.set_defaults(func=cmd_estimate)

    ci = sub.add_parser("ci", help="bootstrap percentile interval")
    data_flags(ci)
    ci.add_argument("--alpha", type=float, default=0.05)
    ci.add_argument("--bootstrap", choices=("reshaped", "naive", "moon"), default="reshaped")
    ci.add_argument("--B", type=int, default=2000)
    ci.add_argument("--q", default="robust", help="odd exponent or 'robust'")
    ci.add_argument("--qbar", type=int, default=3)
    ci.add_argument("--step", default="rot", help="'rot' or 'fixed:<eps>'")
    ci.add_argument("--m", type=int, default=None, help="subsample size (moon only)")
    ci.add_argument("--weights", choices=("multinomial", "dirichlet"), default="multinomial")
    ci.add_argument("--seed", type=int, default=0)
    ci.set_defaults(func=cmd_ci)

    sim = sub.add_parser("simulate", help="Monte Carlo coverage study")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=("csv", "markdown", "json"), default="json")
    sim.add_argument("--workers", type=int, default=None,
                     help="threads (default: MONOBOOT_THREADS or 1)")
    sim.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BoundaryEvaluation, StepOutOfDomain) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (MonobootError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
