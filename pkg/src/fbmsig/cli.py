"""Batch command-line front end.

Every experiment is a subcommand writing a machine-readable table (CSV or
JSON).  Options can come from a flat key=value config file; explicit flags
win.  Words are exchanged as comma-separated letter strings ("1,0,1", letter
0 being the time coordinate); lists of words are separated by semicolons,
other lists by commas.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 quadrature
tolerance failure.  FBMSIG_MAX_WORKERS caps the thread pool used for
independent table rows (default 1; results are identical for any value).
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cubature as cb
from . import expected as ex
from . import gridapprox as ga
from . import sde
from .matchings import refined_count_bound
from .simplexquad import QuadConfig
from .tensor import Word

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_TOLERANCE = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return "" if x is None else str(x)


def _map_rows(fn, items):
    workers = int(os.environ.get("FBMSIG_MAX_WORKERS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


class TableWriter:
    """Collects rows of one fixed column set and writes CSV or JSON."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add(self, **kw):
        self.rows.append([kw.get(c) for c in self.columns])

    def write(self, stream, fmt: str, timestamp: bool):
        if fmt == "csv":
            if timestamp:
                stream.write(f"# generated {_now()}\n")
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_fmt(v) for v in row])
        else:
            payload = {
                "columns": self.columns,
                "rows": [[_fmt(v) for v in row] for row in self.rows],
            }
            if timestamp:
                payload["generated"] = _now()
            json.dump(payload, stream, indent=1)
            stream.write("\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _parse_list(text: str, cast):
    return [cast(t) for t in str(text).split(",") if t != ""]


def _parse_words(text: str) -> list[Word]:
    return [Word.parse(w) for w in str(text).split(";") if w.strip() != ""]


def _read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


# Option defaults live here rather than in argparse so that the precedence
# "explicit flag > config file > default" is decidable (argparse cannot tell
# an explicit flag equal to its default from an omitted one).
_DEFAULTS = {
    "format": "csv",
    "H": "0.75",
    "words": "1,1",
    "m": "4,8,16,32,64",
    "degree": None,
    "branch": "minus",
    "T": "1.0",
    "paths": "10000",
    "steps": "64",
    "seed": "12345",
    "x0": "0.0",
    "problem": "quadratic",
    "M": "1.0",
    "gamma": "0.0",
}
_COMMAND_DEFAULTS = {
    "convergence": {"words": "1,2,1,2;1,1,2,2"},
    "cubature": {"H": "0.5"},
    "bounds": {"H": "0.6,0.75,0.9", "T": "0.5,1,2", "degree": "5"},
}


def _apply_config(args: argparse.Namespace):
    """Resolve each option as: explicit flag, else config value, else default."""
    cfg = _read_config(args.config) if getattr(args, "config", None) else {}
    for key, raw in cfg.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, raw)
    defaults = dict(_DEFAULTS)
    defaults.update(_COMMAND_DEFAULTS.get(args.command, {}))
    for attr, value in defaults.items():
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _quad_config(args) -> QuadConfig:
    return QuadConfig(tol=float(args.tol)) if args.tol is not None else QuadConfig()


def _emit(args, table: TableWriter) -> None:
    timestamp = not args.no_timestamp
    if args.out:
        with open(args.out, "w") as fh:
            table.write(fh, args.format, timestamp)
    else:
        table.write(sys.stdout, args.format, timestamp)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_expected_sig(args) -> int:
    words = _parse_words(args.words)
    hs = _parse_list(args.H, float)
    config = _quad_config(args)
    cols = ["word", "H", "value", "err_bar", "bound", "refined_bound", "pass"]
    table = TableWriter(cols)
    failures = 0

    def one(pair):
        w, H = pair
        return ex.expected_word(w, H, config)

    jobs = [(w, H) for w in words for H in hs]
    try:
        results = _map_rows(one, jobs)
    except ex.QuadratureToleranceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TOLERANCE
    for (w, H), res in zip(jobs, results):
        pure_even = w.letters and all(x != 0 for x in w.letters) and len(w) % 2 == 0
        if pure_even:
            k = len(w) // 2
            bound = 1.0 / (math.factorial(k) * 2**k)
            p = len(set(w.letters))
            refined = refined_count_bound(k, p) / (
                math.factorial(k) * 2**k * math.factorial(2 * k)
            )
            ok = res.value <= bound + res.error + 1e-12
            failures += 0 if ok else 1
            table.add(word=str(w), H=H, value=res.value, err_bar=res.error,
                      bound=bound, refined_bound=refined, **{"pass": ok})
        else:
            table.add(word=str(w), H=H, value=res.value, err_bar=res.error)
    _emit(args, table)
    return EXIT_VERIFICATION if failures else EXIT_OK


def cmd_approx_sig(args) -> int:
    words = _parse_words(args.words)
    hs = _parse_list(args.H, float)
    ms = _parse_list(args.m, int)
    table = TableWriter(["word", "H", "m", "approx"])
    for w in words:
        for H in hs:
            for m in ms:
                table.add(word=str(w), H=H, m=m,
                          approx=ga.approx_expected_word(w, H, m))
    _emit(args, table)
    return EXIT_OK


def cmd_convergence(args) -> int:
    words = _parse_words(args.words)
    hs = _parse_list(args.H, float)
    ms = sorted(_parse_list(args.m, int))
    if len(ms) < 4:
        print("error: convergence needs at least 4 grid sizes", file=sys.stderr)
        return EXIT_USAGE
    config = _quad_config(args)
    cols = ["kind", "word", "H", "m", "exact", "approx", "gap", "m2H_gap",
            "err_bar", "slope", "slope_residual", "coeff_bound",
            "max_m2H_gap", "bound_pass", "note"]
    table = TableWriter(cols)
    any_fail = False
    try:
        for w in words:
            for H in hs:
                rows = []
                for m in ms:
                    g = ga.signature_gap(w, H, m, config)
                    rows.append((m, g))
                    table.add(kind="row", word=str(w), H=H, m=m, exact=g.exact,
                              approx=g.approx, gap=g.gap,
                              m2H_gap=m ** (2 * H) * g.gap, err_bar=g.err_bar)
                fit = ga.convergence_slope(w, H, ms, config)
                bound = ga.coefficient_bound_check(w, H, ms, config)
                any_fail |= not bound.passed
                table.add(kind="summary", word=str(w), H=H,
                          slope=fit.slope if fit.ok else None,
                          slope_residual=fit.residual if fit.ok else None,
                          coeff_bound=bound.bound,
                          max_m2H_gap=bound.max_scaled_gap,
                          bound_pass=bound.passed,
                          note="" if fit.ok else f"fit refused: {fit.reason}")
    except ex.QuadratureToleranceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TOLERANCE
    _emit(args, table)
    return EXIT_VERIFICATION if any_fail else EXIT_OK


def cmd_cubature(args) -> int:
    hs = _parse_list(args.H, float)
    if args.action == "solve":
        branches = ("minus", "plus") if args.branch == "both" else (args.branch,)
        table = TableWriter(["H", "branch", "lam1", "lam3", "a", "b1", "b0",
                             "c1", "c0", "max_residual"])
        for H in hs:
            for br in branches:
                s = cb.solve_ansatz(H, br)
                table.add(H=H, branch=br, lam1=s.lam1, lam3=s.lam3, a=s.a,
                          b1=s.b1, b0=s.b0, c1=s.c1, c0=s.c0,
                          max_residual=max(abs(r) for r in cb.system_residuals(s)))
        _emit(args, table)
        return EXIT_OK
    # verify
    config = _quad_config(args)
    table = TableWriter(["H", "degree", "word", "weight", "lhs", "rhs",
                         "abs_err", "lhs_source", "passed"])
    all_ok = True
    for H in hs:
        formula = (cb.three_path_formula(H) if args.branch == "minus"
                   else cb.formula_from_solution(cb.solve_ansatz(H, args.branch)))
        degree = int(args.degree) if args.degree is not None else formula.claimed_degree
        rep = cb.verify_formula(formula, H, degree, config)
        all_ok &= rep.passed
        for r in rep.rows:
            table.add(H=H, degree=degree, word=str(r.word), weight=r.weight,
                      lhs=r.lhs, rhs=r.rhs, abs_err=r.abs_err,
                      lhs_source=r.lhs_source, passed=r.passed)
    _emit(args, table)
    return EXIT_OK if all_ok else EXIT_VERIFICATION


def _sde_problem(name: str, x0: float):
    zero = lambda y: np.zeros_like(y)
    if name == "quadratic":
        vf = sde.VectorFieldSet(1, (zero, lambda y: np.ones_like(y)))
        f = lambda y: y[..., 0] ** 2
    elif name == "zero":
        vf = sde.VectorFieldSet(1, (zero, zero))
        f = lambda y: y[..., 0]
    else:
        raise ValueError(f"unknown problem {name!r} (expected quadratic or zero)")
    return vf, f, np.array([x0])


def cmd_sde(args) -> int:
    H = float(args.H)
    vf, f, x0 = _sde_problem(args.problem, float(args.x0))
    formula = cb.three_path_formula(H)
    rep = sde.run_compare(
        vf, f, x0, formula, H=H, T=float(args.T), n_paths=int(args.paths),
        n_steps=int(args.steps), seed=int(args.seed),
        M=float(args.M), gamma=float(args.gamma),
    )
    table = TableWriter(["H", "T", "problem", "x0", "cubature_value", "mc_value",
                         "mc_stderr", "bound_value", "bound_branch", "n_paths",
                         "n_steps", "seed"])
    table.add(H=rep.H, T=rep.T, problem=args.problem, x0=float(args.x0),
              cubature_value=rep.cubature_value, mc_value=rep.mc_value,
              mc_stderr=rep.mc_stderr, bound_value=rep.bound_value,
              bound_branch=rep.bound_branch, n_paths=rep.n_paths,
              n_steps=rep.n_steps, seed=int(args.seed))
    _emit(args, table)
    return EXIT_OK


def cmd_bounds(args) -> int:
    hs = _parse_list(args.H, float)
    ts = _parse_list(args.T, float)
    table = TableWriter(["H", "A", "A_err", "Atilde", "Atilde_err", "K", "T",
                         "bound_shape", "branch"])
    for H in hs:
        a = ga.constant_A(H)
        at = ga.constant_Atilde(H)
        params = sde.ErrorBoundParams(M=float(args.M), gamma=float(args.gamma),
                                      d=1, degree=int(args.degree), H=H)
        for T in ts:
            shape = sde.error_bound_shape(params, T)
            table.add(H=H, A=a.value, A_err=a.error, Atilde=at.value,
                      Atilde_err=at.error, K=params.K, T=T,
                      bound_shape=shape.value, branch=shape.branch)
    _emit(args, table)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the generated-at header for byte-identical reruns")
    common.add_argument("--tol", default=None, help="quadrature tolerance")

    p = argparse.ArgumentParser(prog="fbmsig", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("expected-sig", parents=[common],
                       help="exact expected signature coefficients")
    s.add_argument("--H")
    s.add_argument("--words")
    s.set_defaults(fn=cmd_expected_sig)

    s = sub.add_parser("approx-sig", parents=[common],
                       help="grid-approximation expected coefficients")
    s.add_argument("--H")
    s.add_argument("--words")
    s.add_argument("--m")
    s.set_defaults(fn=cmd_approx_sig)

    s = sub.add_parser("convergence", parents=[common],
                       help="gap table, fitted rate and coefficient bound")
    s.add_argument("--H")
    s.add_argument("--words")
    s.add_argument("--m")
    s.set_defaults(fn=cmd_convergence)

    s = sub.add_parser("cubature", parents=[common],
                       help="verify the cubature identity or solve the ansatz")
    s.add_argument("action", choices=("verify", "solve"))
    s.add_argument("--H")
    s.add_argument("--degree")
    s.add_argument("--branch", choices=("minus", "plus", "both"))
    s.set_defaults(fn=cmd_cubature)

    s = sub.add_parser("sde", parents=[common],
                       help="weak approximation vs Monte-Carlo reference")
    s.add_argument("action", choices=("compare",))
    s.add_argument("--H")
    s.add_argument("--T")
    s.add_argument("--paths")
    s.add_argument("--steps")
    s.add_argument("--seed")
    s.add_argument("--x0")
    s.add_argument("--problem")
    s.add_argument("--M")
    s.add_argument("--gamma")
    s.set_defaults(fn=cmd_sde)

    s = sub.add_parser("bounds", parents=[common],
                       help="explicit constants and error-bound shapes")
    s.add_argument("--H")
    s.add_argument("--T")
    s.add_argument("--M")
    s.add_argument("--gamma")
    s.add_argument("--degree")
    s.set_defaults(fn=cmd_bounds)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.fn(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ex.QuadratureToleranceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
