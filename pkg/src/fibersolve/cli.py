"""Command-line front end.

Exit codes: 0 success, 1 configuration or parse error, 2 a solvability
condition fails, 3 the iteration did not produce a solution.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .conditions import BetaTooLarge, ConditionError, HypothesisViolation, validate
from .expr import ExprError
from .inverse import InversionError, MonotonicityError
from .problemfile import ProblemFileError, load_problem
from .solver import (
    InvariantViolation, MaxIterExceeded, MembershipDrift, SolverError,
    build_problem, iterate_fiber, zero_seed,
)
from .verify import verify_solution

EXIT_OK, EXIT_CONFIG, EXIT_CONDITION, EXIT_NONCONVERGENCE = 0, 1, 2, 3

DEFAULTS = {"tol": 1e-10, "max_iter": 200}


def dump_json(doc):
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _error(exc):
    return {"type": type(exc).__name__, "message": str(exc)}


class _Failure(Exception):
    def __init__(self, code, doc):
        self.code = code
        self.doc = doc


def _prepare(args, kind):
    """Load the file, build the problem and validate it.

    Returns ``(problem_file, problem, report, overrides)``; raises
    :class:`_Failure` with an exit code and a JSON document otherwise.
    """
    doc = {"kind": kind, "status": "fail", "problem": str(args.path)}
    try:
        pf = load_problem(args.path)
    except (ProblemFileError, ExprError) as exc:
        raise _Failure(EXIT_CONFIG, {**doc, "error": _error(exc)}) from None

    # flags override file values, file values override defaults
    solver = {**DEFAULTS, **pf.solver}
    domain = dict(pf.domain)
    for key, attr in (("tol", "tol"), ("max_iter", "max_iter"), ("L", "L"), ("rho", "rho"),
                      ("policy", "policy")):
        if getattr(args, attr, None) is not None:
            solver[key] = getattr(args, attr)
    for key, attr in (("A", "interval"), ("grid_n", "grid_n")):
        if getattr(args, attr, None) is not None:
            domain[key] = getattr(args, attr)
    if getattr(args, "L", None) is not None or getattr(args, "rho", None) is not None:
        if getattr(args, "policy", None) is None:
            solver["policy"] = "explicit"
    policy = solver.get("policy")
    if policy is None:
        policy = "explicit" if ("L" in solver or "rho" in solver) else "midpoint"

    fn = pf.functions
    try:
        problem = build_problem(
            fn["h"], fn["f"], fn["g"], fn.get("hp"), fn.get("fp"), fn.get("gp"),
            constants=pf.constants, A=domain.get("A"),
            grid_n=domain.get("grid_n", 4001),
            inverse_tol=solver.get("inverse_tol", 1e-12))
    except HypothesisViolation as exc:
        raise _Failure(EXIT_CONDITION, {**doc, "error": _error(exc)}) from None
    except (ExprError, MonotonicityError, InversionError, ValueError) as exc:
        raise _Failure(EXIT_CONFIG, {**doc, "error": _error(exc)}) from None

    c = problem.constants
    doc["constants"] = {"K": c.K, "alpha": c.alpha, "beta": c.beta, "g_bound": c.g_bound}
    doc["provenance"] = dict(c.provenance)
    try:
        report = validate(c, policy, solver.get("L"), solver.get("rho"))
    except BetaTooLarge as exc:
        doc.update(case=exc.case.value, beta_bound=exc.bound, error=_error(exc))
        raise _Failure(EXIT_CONDITION, doc) from None
    except HypothesisViolation as exc:
        raise _Failure(EXIT_CONDITION, {**doc, "error": _error(exc)}) from None
    except (ConditionError, ValueError) as exc:
        # out-of-window explicit choices are configuration mistakes
        raise _Failure(EXIT_CONFIG, {**doc, "error": _error(exc)}) from None
    return pf, problem, report, solver


def cmd_validate(args):
    try:
        _, problem, report, _ = _prepare(args, "validation")
    except _Failure as fail:
        sys.stdout.write(dump_json(fail.doc))
        return fail.code
    sys.stdout.write(dump_json({
        "kind": "validation", "status": "pass", "problem": str(args.path),
        "report": report.to_json(),
    }))
    return EXIT_OK


def cmd_solve(args):
    try:
        _, problem, report, solver = _prepare(args, "solution")
    except _Failure as fail:
        sys.stdout.write(dump_json(fail.doc))
        return fail.code

    prefix = Path(args.out) if args.out else Path(Path(args.path).stem)
    doc = {
        "kind": "solution", "problem": str(args.path),
        "A": problem.A, "grid_n": problem.grid_n,
        "tol": solver["tol"], "max_iter": solver["max_iter"],
        "condition": report.to_json(),
    }
    try:
        sol = iterate_fiber(*zero_seed(problem), problem, tol=solver["tol"],
                            max_iter=solver["max_iter"], report=report,
                            residual_tol=solver.get("residual_tol"))
    except SolverError as exc:
        if args.trace and exc.trace is not None:
            exc.trace.to_csv(args.trace)
        status = {MaxIterExceeded: "max_iter", MembershipDrift: "membership_drift",
                  InvariantViolation: "invariant_violation"}.get(type(exc), "fail")
        doc.update(status=status,
                   iterations=len(exc.trace) if exc.trace else 0, error=_error(exc))
        sys.stdout.write(dump_json(doc))
        return EXIT_NONCONVERGENCE

    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = {"phi": f"{prefix}_phi.csv", "Phi": f"{prefix}_Phi.csv",
             "report": f"{prefix}_report.json"}
    sol.phi_star.to_csv(files["phi"])
    sol.Phi_star.to_csv(files["Phi"])
    if args.trace:
        sol.trace.to_csv(args.trace)
        files["trace"] = str(args.trace)
    doc.update(status="converged", iterations=sol.iterations,
               error_bound=sol.error_bound,
               verification=verify_solution(sol, problem).to_json(),
               files=files)
    text = dump_json(doc)
    Path(files["report"]).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _format_validation(doc):
    lines = [f"problem: {doc.get('problem')}", f"status:  {doc.get('status')}"]
    r = doc.get("report")
    if r:
        c = r["constants"]
        lines += [
            f"case:    {r['case']}  (threshold 2(1-1/K) = {r['threshold']:.6g})",
            f"K = {c['K']:g}  alpha = {c['alpha']:g}  beta = {c['beta']:g}  "
            f"sup|g| = {c['g_bound']:g}",
            f"beta bound:   {r['beta_bound']:.12g}",
            f"L window:     [{r['L_window']['lo']:.6g}, {r['L_window']['hi']:.6g}"
            f"{']' if r['L_window']['hi_closed'] else ')'}",
            f"rho window:   [{r['rho_window']['lo']:.6g}, {r['rho_window']['hi']:.6g}"
            f"{']' if r['rho_window']['hi_closed'] else ')'}",
            f"chosen L, rho: {r['chosen_L']:.6g}, {r['chosen_rho']:.6g}",
            f"factors:      Lambda {r['lambda_factor']:.6g}, Psi {r['psi_factor']:.6g}",
        ]
    if doc.get("error"):
        lines.append(f"error:   {doc['error']['type']}: {doc['error']['message']}")
    return "\n".join(lines)


def _format_solution(doc):
    lines = [f"problem:    {doc.get('problem')}", f"status:     {doc.get('status')}",
             f"iterations: {doc.get('iterations')}"]
    v = doc.get("verification")
    cond = doc.get("condition", {})
    rows = []
    if v:
        rows += [("residual sup", v["residual_sup"]),
                 ("residual argmax", v["residual_argmax"]),
                 ("derivative mismatch", v["derivative_mismatch_sup"]),
                 ("Lip(phi*)", v["lipschitz_of_solution"]),
                 ("sup|Phi*|", v["derivative_bound"]),
                 ("observed ratio", v["observed_ratio"]),
                 ("theoretical factor", v["theoretical_factor"])]
    if cond:
        rows += [("L", cond["chosen_L"]), ("rho", cond["chosen_rho"]),
                 ("Lambda factor", cond["lambda_factor"]),
                 ("Psi factor", cond["psi_factor"])]
    if "error_bound" in doc:
        rows.append(("error bound (phi)", doc["error_bound"]))
    lines += [f"  {name:<22}{value:.6e}" for name, value in rows]
    if doc.get("error"):
        lines.append(f"error: {doc['error']['type']}: {doc['error']['message']}")
    return "\n".join(lines)


def cmd_report(args):
    path = Path(args.path)
    if path.is_dir():
        files = sorted(path.glob("*_report.json"))
    elif path.is_file():
        files = [path]
    else:
        files = []
    if not files:
        print(f"error: no report artifacts (*_report.json) found at {path}", file=sys.stderr)
        return EXIT_CONFIG
    for i, fp in enumerate(files):
        try:
            doc = json.loads(fp.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot parse {fp}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.json:
            sys.stdout.write(dump_json(doc))
            continue
        if i:
            print()
        kind = doc.get("kind") if isinstance(doc, dict) else None
        if kind == "solution":
            print(_format_solution(doc))
        elif kind == "validation":
            print(_format_validation(doc))
        else:
            print(f"error: {fp} is not a fibersolve report", file=sys.stderr)
            return EXIT_CONFIG
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fibersolve",
        description="Solve phi(phi(x)) = h(phi(f(x))) + g(x) by fiber contraction.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the solvability conditions")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="run the iteration and verify the result")
    p.add_argument("path")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--interval", type=float, help="grid halfwidth A")
    p.add_argument("--L", dest="L", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--policy", choices=("midpoint", "min", "explicit"))
    p.add_argument("--trace", help="write the iteration trace CSV here")
    p.add_argument("--out", help="output prefix for <prefix>_phi.csv etc.")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="summarise the JSON artifacts of a run")
    p.add_argument("path", help="directory with *_report.json files, or one JSON file")
    p.add_argument("--json", action="store_true", help="re-emit the JSON unchanged")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
