"""Command-line entry point: ``kmono {interpolate,counterexample,lse,gap}``.

Exit codes: 0 success, 2 argument error, 3 conditioning error,
4 verification failure, 5 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from datetime import datetime, timezone
from fractions import Fraction
from importlib import metadata
from pathlib import Path

import numpy as np

from . import counterexample as cx
from .densities import parse_density
from .errors import ConditioningError, ConvergenceError
from .gap_experiment import GapTrialResult, estimate_rate
from .lse import SampleSet, SolverConfig, fenchel_audit, fit_lse
from .spline_core import KnotVector, PiecewisePoly, interp_error, perfect_spline, truncated_power_poly

EXIT_OK, EXIT_ARGS, EXIT_CONDITIONING, EXIT_VERIFY, EXIT_SOLVER = 0, 2, 3, 4, 5

log = logging.getLogger("kmono")


class UsageError(Exception):
    pass


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False) + "\n")


class Run:
    """Collects outputs of one command and writes the manifest beside them."""

    def __init__(self, args):
        self.command = args.command
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir", "verbose")}
        self.seed = getattr(args, "seed", None)
        self.started = _now()
        self.files = []

    def path(self, name):
        p = self.out / name
        self.files.append(name)
        return p

    def finish(self, status):
        write_json(
            self.out / f"{self.command}.manifest.json",
            {
                "command": self.command,
                "config": self.config,
                "seed": self.seed,
                "tool_version": tool_version(),
                "files": self.files,
                "exit_code": status,
                "started": self.started,
                "finished": _now(),
            },
        )
        return status


def _floats(text, name):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}")
    if not vals:
        raise UsageError(f"--{name}: empty list")
    return vals


def _target(spec, k, nodes):
    """Target callable ``f(x, nu)`` from ``poly:c0,c1,..``, ``perfect-spline`` or ``truncated-power:t``."""
    a, b = nodes[0], nodes[-1]
    if spec.startswith("poly:"):
        c = np.array(_floats(spec[5:], "target"))
        return PiecewisePoly.polynomial(c, a, b)
    if spec == "perfect-spline":
        return perfect_spline(k, list(nodes[1:-1]))
    if spec.startswith("truncated-power:"):
        t = _floats(spec[len("truncated-power:"):], "target")[0]
        return truncated_power_poly(t, k, a, b)
    raise UsageError(f"unknown target {spec!r}; use poly:..., perfect-spline or truncated-power:t")


def cmd_interpolate(args, run):
    nodes = _floats(args.nodes, "nodes")
    if len(nodes) != 2 * args.k - 2:
        raise UsageError(f"k={args.k} needs {2 * args.k - 2} nodes, got {len(nodes)}")
    try:
        KnotVector(nodes)
    except ValueError as err:
        raise UsageError(str(err))
    target = _target(args.target, args.k, nodes)
    rep = interp_error(target, nodes, args.k)
    x = np.linspace(nodes[0], nodes[-1], args.points)
    cols = [rep.interpolant(x, d) - target(x, d) if d <= target.degree else rep.interpolant(x, d)
            for d in range(2 * args.k)]
    header = ["x", "error"] + [f"error_d{d}" for d in range(1, 2 * args.k)]
    write_csv(run.path("interpolate_error.csv"), header, zip(x, *cols))
    write_json(run.path("interpolate_report.json"), {**rep.to_dict(), "target": args.target})
    print(f"sup |H f - f| = {rep.sup_norms[0]!r}  condition = {rep.condition!r}")
    return EXIT_OK


def _tau_value(text):
    """Decimal strings become exact rationals; the determinant route stays exact."""
    try:
        return Fraction(text)
    except ValueError:
        raise UsageError(f"bad tau value {text!r}")


def cmd_counterexample(args, run):
    if args.tau1:
        grid = [_tau_value(t) for t in args.tau1.split(",") if t.strip()]
    else:
        grid = [Fraction(float(t)) for t in np.geomspace(0.2, 1e-3, args.grid_points)]
    if args.link == "double":
        link = cx.double_link
    else:
        try:
            tau2 = _tau_value(args.link.split(":", 1)[1]) if args.link.startswith("fixed:") else None
        except IndexError:
            tau2 = None
        if tau2 is None:
            raise UsageError("--link must be 'double' or 'fixed:<tau2>'")
        link = lambda t1: tau2  # noqa: E731
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    try:
        methods = [cx.Method(m) for m in methods]
    except ValueError as err:
        raise UsageError(str(err))
    for t in grid:
        if not (0 < t < link(t) < 1):
            raise UsageError(f"inadmissible knots tau1={float(t)}, tau2={float(link(t))}")
    rows = cx.blowup_scan(grid, link, methods)
    write_csv(
        run.path("counterexample.csv"),
        ["tau1", "tau2", "method", "e5_at_zero", "product_21tau1", "condition"],
        ([r.tau1, r.tau2, r.method.value, r.e5_at_zero, r.product_21tau1, r.condition] for r in rows),
    )
    worst, ok = cx.cross_check(rows, args.rtol)
    for r in rows:
        print(f"{r.tau1!r:>24} {r.method.value:>15} {r.product_21tau1!r}")
    print(f"max relative disagreement between methods: {worst!r} (rtol {args.rtol!r})")
    write_json(run.path("counterexample_check.json"), {"max_rel_diff": worst, "rtol": args.rtol, "ok": ok})
    return EXIT_OK if ok else EXIT_VERIFY


def _samples(args):
    if args.data:
        try:
            vals = [float(line) for line in Path(args.data).read_text().split() if line.strip()]
        except (OSError, ValueError) as err:
            raise UsageError(f"cannot read --data: {err}")
        try:
            return SampleSet(vals, seed=args.seed, source=str(args.data))
        except ValueError as err:
            raise UsageError(str(err))
    n, rate = args.sample_exp
    if int(n) != n or n < 1 or not rate > 0:
        raise UsageError("--sample-exp needs a positive integer n and a positive rate")
    return SampleSet.exponential(int(n), rate, seed=args.seed)


def cmd_lse(args, run):
    samples = _samples(args)
    config = SolverConfig(args.tolerance, args.max_iterations, args.support_pad)
    try:
        fit = fit_lse(samples, args.k, config)
    except ConvergenceError as err:
        best = err.best
        write_json(
            run.path("lse_failure.json"),
            {"error": str(err), "violation": err.violation, "config": config.to_string(),
             "best": best.to_dict() if best is not None else None},
        )
        print(f"solver failed: {err}", file=sys.stderr)
        return EXIT_SOLVER
    audit = fenchel_audit(fit, samples)
    write_json(
        run.path("lse_fit.json"),
        {**fit.to_dict(), "config": config.to_string(), "n": samples.n, "source": samples.source,
         "audit": audit.to_dict(), "audit_passed": audit.passed()},
    )
    x = np.linspace(0.0, fit.domain_end, args.points)
    write_csv(run.path("lse_density.csv"), ["x", "density"], zip(x, fit.density(x)))
    print(
        f"k={fit.k} n={samples.n} knots={fit.thetas.size} mass={fit.mass!r} objective={fit.objective!r}\n"
        f"fenchel: min_gap={audit.min_gap!r} max_knot_gap={audit.max_knot_gap!r} "
        f"max_knot_slope_gap={audit.max_knot_slope_gap!r} scale={audit.scale!r} "
        f"passed={audit.passed()}"
    )
    return EXIT_OK


def cmd_gap(args, run):
    try:
        n_values = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--n-list: expected integers, got {args.n_list!r}")
    if not n_values or min(n_values) < 1:
        raise UsageError("--n-list needs positive integers")
    try:
        density = parse_density(args.density)
        est = estimate_rate(
            args.k, n_values, args.trials, args.x0, args.seed, density, args.workers,
            audit=args.audit, n_boot=args.bootstrap, strict=False,
        )
    except ValueError as err:
        raise UsageError(str(err))
    write_csv(run.path("gap_trials.csv"), GapTrialResult.CSV_COLUMNS, (t.row() for t in est.trials))
    write_json(run.path("gap_rate.json"), est.to_dict())
    if args.audit:
        write_json(
            run.path("gap_audit.json"),
            [{"n": t.n, "trial": t.trial, **t.audit.to_dict()} for t in est.trials if t.audit is not None],
        )
    print(f"k={args.k} slope={est.slope!r} ci={list(est.slope_ci)} conjectured={-1 / (2 * args.k + 1)!r}")
    for n, q in est.noncoalescence_quantiles.items():
        print(f"  n={n} noncoalescence quantiles {q}")
    if args.audit:
        print(f"inequality audit: {est.audit_violations} violations, {est.audit_skipped} skipped")
    if est.warning:
        print(f"warning: {est.warning}", file=sys.stderr)
    if all(t.failed for t in est.trials):
        return EXIT_SOLVER
    if args.audit and est.audit_violations:
        return EXIT_VERIFY
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="out", help="output directory (default ./out)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="kmono", description="Hermite spline and k-monotone LSE laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("interpolate", parents=[common], help="Hermite interpolation error report")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--nodes", required=True, help="comma-separated, 2k-2 values")
    s.add_argument("--target", default="perfect-spline",
                   help="poly:c0,c1,... | perfect-spline | truncated-power:t")
    s.add_argument("--points", type=int, default=2001)
    s.set_defaults(func=cmd_interpolate)

    s = sub.add_parser("counterexample", parents=[common], help="blow-up of the fifth error derivative at zero (k = 3)")
    s.add_argument("--tau1", help="comma-separated tau1 values (default: geometric 0.2 .. 1e-3)")
    s.add_argument("--grid-points", type=int, default=12)
    s.add_argument("--link", default="double", help="double | fixed:<tau2>")
    s.add_argument("--methods", default="determinant,closed_form",
                   help="comma-separated subset of determinant, closed_form, spline_numeric")
    s.add_argument("--rtol", type=float, default=1e-6)
    s.set_defaults(func=cmd_counterexample)

    s = sub.add_parser("lse", parents=[common], help="least-squares k-monotone density estimate")
    s.add_argument("--k", type=int, required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--sample-exp", nargs=2, type=float, metavar=("N", "RATE"))
    src.add_argument("--data", help="file with one observation per line")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tolerance", type=float, default=SolverConfig.tolerance)
    s.add_argument("--max-iterations", type=int, default=SolverConfig.max_iterations)
    s.add_argument("--support-pad", type=float, default=None)
    s.add_argument("--points", type=int, default=1001)
    s.set_defaults(func=cmd_lse)

    s = sub.add_parser("gap", parents=[common], help="Monte Carlo knot-gap experiment")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--x0", type=float, default=1.0)
    s.add_argument("--n-list", required=True)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--density", default="exponential")
    s.add_argument("--workers", type=int, default=None, help="default: KMONO_WORKERS or CPU count")
    s.add_argument("--bootstrap", type=int, default=1000)
    s.add_argument("--audit", action="store_true", help="also run the inequality audit per trial")
    s.set_defaults(func=cmd_gap)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "k", 1) < 1:
        parser.error("--k must be >= 1")
    run = Run(args)
    try:
        status = args.func(args, run)
    except UsageError as err:
        print(f"{parser.prog} {args.command}: error: {err}", file=sys.stderr)
        status = EXIT_ARGS
    except ConditioningError as err:
        knots = list(err.knots.points) if err.knots is not None else []
        print(f"conditioning error: {err} (knots {knots})", file=sys.stderr)
        status = EXIT_CONDITIONING
    return run.finish(status)


if __name__ == "__main__":
    sys.exit(main())
