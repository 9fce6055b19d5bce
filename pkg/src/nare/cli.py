"""Command-line front end: ``nare {solve,bench,history,diagnose}``.

Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 diagnostic refusal.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis
from .problem import ProblemParams, build_problem
from .solvers import SolverConfig, SolverError, parse_method, solve

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3

CSV_HEADER = ("alpha", "c", "n", "method", "iterations", "res_final", "elapsed_ms", "converged")

DEFAULT_GRID = (
    (0.9, 0.1),
    (0.7, 0.3),
    (0.3, 0.7),
    (0.1, 0.9),
    (1e-3, 1 - 1e-3),
    (1e-5, 1 - 1e-5),
    (1e-7, 1 - 1e-7),
    (1e-8, 1 - 1e-8),
)
DEFAULT_METHODS = ("tsmnm", "nm", "tsnm1", "tsnm2", "nsm(3)", "nsm(5)", "nsm(10)", "fpi")


class UsageError(Exception):
    pass


@dataclass
class BenchRow:
    alpha: float
    c: float
    n: int
    method: str
    iterations: int
    res_final: float
    elapsed_ms: float
    converged: bool

    def csv_fields(self):
        return [
            repr(float(self.alpha)),
            repr(float(self.c)),
            str(self.n),
            self.method,
            str(self.iterations),
            f"{self.res_final:.9e}",
            f"{self.elapsed_ms:.9g}",
            "true" if self.converged else "false",
        ]

    @classmethod
    def from_csv_fields(cls, fields):
        if isinstance(fields, dict):
            fields = [fields[k] for k in CSV_HEADER]
        a, c, n, method, it, res, ms, conv = fields
        return cls(float(a), float(c), int(n), method, int(it), float(res), float(ms), conv == "true")

    def to_json(self):
        d = asdict(self)
        d["res_final"] = None if math.isnan(self.res_final) else self.res_final
        return d


def write_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.csv_fields())


def read_csv(fh):
    return [BenchRow.from_csv_fields(r) for r in csv.DictReader(fh)]


def parse_grid(text):
    """``alpha,c`` pairs, one per line; commas or whitespace; ``#`` comments."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise UsageError(f"grid line {lineno}: expected 'alpha,c', got {line!r}")
        try:
            pairs.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise UsageError(f"grid line {lineno}: {exc}") from None
    return pairs


def _params(alpha, c, n):
    try:
        return ProblemParams(alpha, c, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(method, **kw):
    try:
        return SolverConfig(method, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _methods(spec):
    items = [m for m in (s.strip() for s in spec.split(",")) if m] if spec is not None else []
    if not items:
        raise UsageError("methods list is empty")
    for m in items:
        try:
            parse_method(m)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return items


def run_case(params, method, repeats=1, max_iter=None, problem=None):
    """One BenchRow; numerical failures become ``converged=false`` rows."""
    problem = problem or build_problem(params)
    config = _config(method, max_iter=max_iter)
    elapsed = []
    report = None
    for _ in range(repeats):
        try:
            rep = solve(problem, config)
        except SolverError as exc:
            return BenchRow(params.alpha, params.c, params.n, config.label,
                            int(exc.iteration or 0), float("nan"), 0.0, False)
        report = report or rep
        elapsed.append(rep.elapsed)
    return BenchRow(params.alpha, params.c, params.n, report.method, report.iterations,
                    float(report.res_final), 1e3 * float(np.mean(elapsed)), report.converged)


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", encoding="utf-8", newline="") if self.path else sys.stdout
        return self.fh

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()


def _dump_json(obj, fh):
    fh.write(json.dumps(obj, allow_nan=False, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def cmd_solve(args):
    params = _params(args.alpha, args.c, args.n)
    config = _config(args.method, max_iter=args.max_iter, record_trace=args.trace)
    problem = build_problem(params)
    try:
        report = solve(problem, config)
    except SolverError as exc:
        with _Output(args.out) as fh:
            _dump_json({"error": exc.kind, "message": str(exc), "iteration": exc.iteration,
                        "alpha": params.alpha, "c": params.c, "n": params.n, "method": config.label}, fh)
        return EXIT_NUMERICAL

    row = BenchRow(params.alpha, params.c, params.n, report.method, report.iterations,
                   float(report.res_final), 1e3 * report.elapsed, report.converged)
    extra = {}
    if args.trace:
        extra["res_history"] = [float(r) for r in report.res_history]
        if config.method == "tsmnm":
            violations = analysis.audit_monotone(report.trace, report.x, problem=problem)
            extra["monotone_violations"] = len(violations)
    with _Output(args.out) as fh:
        if args.format == "json":
            _dump_json({**row.to_json(), **extra}, fh)
        else:
            write_csv([row], fh)
            if args.trace:
                fh.write("\n# res_history\nk,res\n")
                for k, r in enumerate(extra["res_history"], 1):
                    fh.write(f"{k},{r:.9e}\n")
                if "monotone_violations" in extra:
                    fh.write(f"\n# monotone_violations,{extra['monotone_violations']}\n")
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def cmd_bench(args):
    methods = _methods(args.methods) if args.methods is not None else list(DEFAULT_METHODS)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if args.grid:
        try:
            with open(args.grid, encoding="utf-8") as fh:
                grid = parse_grid(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read grid file: {exc}") from None
    else:
        grid = list(DEFAULT_GRID)
    try:
        n_list = [int(s) for s in args.n_list.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --n-list {args.n_list!r}") from None
    cases = [_params(a, c, n) for n in n_list for a, c in grid]

    def work(params):
        problem = build_problem(params)
        return [run_case(params, m, args.repeats, args.max_iter, problem) for m in methods]

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            results = list(pool.map(work, cases))
    else:
        results = [work(p) for p in cases]
    with _Output(args.out) as fh:
        write_csv([row for rows in results for row in rows], fh)
    return EXIT_OK


def cmd_history(args):
    params = _params(args.alpha, args.c, args.n)
    methods = _methods(args.methods)
    problem = build_problem(params)
    rows, status = [], EXIT_OK
    for m in methods:
        config = _config(m, max_iter=args.max_iter)
        try:
            report = solve(problem, config)
        except SolverError:
            status = EXIT_NUMERICAL
            continue
        if not report.converged:
            status = EXIT_NUMERICAL
        rows.extend((report.method, k, r) for k, r in enumerate(report.res_history, 1))
    with _Output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "k", "res"))
        for method, k, r in rows:
            w.writerow((method, k, f"{r:.9e}"))
    return status


def cmd_diagnose(args):
    params = _params(args.alpha, args.c, args.n)
    problem = build_problem(params)
    config = _config("tsmnm", max_iter=args.max_iter, record_trace=True)
    try:
        report = solve(problem, config)
    except SolverError as exc:
        with _Output(args.out) as fh:
            _dump_json({"error": exc.kind, "message": str(exc), "iteration": exc.iteration}, fh)
        return EXIT_NUMERICAL
    x_ref = analysis.reference_solution(problem, report.trace)
    base = {"alpha": params.alpha, "c": params.c, "n": params.n,
            "iterations": report.iterations, "converged": report.converged}
    try:
        diag = analysis.singular_diagnostics(problem, report.trace, x_ref, omega=args.omega,
                                             theta=args.theta, r=args.r, threshold=args.threshold)
    except analysis.NotSingularError as exc:
        with _Output(args.out) as fh:
            _dump_json({**base, "refused": True, "reason": str(exc), "sigma_min": exc.sigma_min,
                        "threshold": exc.threshold}, fh)
        return EXIT_REFUSED
    try:
        order = analysis.estimate_order(report.trace, x_ref)
        fitted, contraction = order.order, [float(v) for v in order.contraction]
    except analysis.AnalysisError:
        fitted, contraction = None, []
    with _Output(args.out) as fh:
        _dump_json({**base, "refused": False, **diag.to_dict(), "fitted_order": _finite(fitted),
                    "contraction": contraction}, fh)
    return EXIT_OK


def _add_params(p):
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--n", type=int, required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="nare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver and emit a result row")
    _add_params(p)
    p.add_argument("--method", default="tsmnm")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--trace", action="store_true", help="include RES history (and monotone audit for tsmnm)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="sweep an (alpha, c) grid over sizes and methods")
    p.add_argument("--grid", default=None, help="file with one 'alpha,c' pair per line")
    p.add_argument("--n-list", default="1024")
    p.add_argument("--methods", default=None, help="comma list, e.g. tsmnm,nm,nsm(3),fpi")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("history", help="per-iteration RES table (method,k,res)")
    _add_params(p)
    p.add_argument("--methods", default="tsmnm,nm")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_history)

    p = sub.add_parser("diagnose", help="singular-root diagnostics of a TSMNM run")
    _add_params(p)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--r", type=float, default=math.inf)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nare {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
