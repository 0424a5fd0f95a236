"""Batch command-line front end.

Exit codes: 0 success, 2 unreadable or invalid input, 3 an assumption does
not hold, 4 a preserved quantity drifted (bug or false certificate).
"""
from __future__ import annotations

import argparse
import sys
import time
import warnings

import numpy as np

from . import io
from .errors import AssumptionViolated, InvarianceBroken, ParseError, TeamsubError
from .generate import generate_random_problem
from .linalg import Tolerance
from .lqg import (
    decentralized_gains,
    exact_cost,
    sum_identity_residual,
    simulate,
    synthesize,
    validate_lqg,
)
from .static import (
    expand,
    expected_cost,
    realize_static_strategy,
    solve_static,
    to_static,
)
from .team import analyze_precedence, certify_substitutability, validate
from .transform import remove_violations, violations

EXIT_OK, EXIT_PARSE, EXIT_ASSUMPTION, EXIT_INVARIANCE = 0, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code, report):
        self.code, self.report = code, report


def _tol(args) -> Tolerance:
    return Tolerance(args.tol, args.tol)


def _load_team(args, report):
    problem = io.load_team(args.input)
    bad = validate(problem)
    if bad:
        report["errors"] = bad
        raise _Exit(EXIT_PARSE, report)
    return problem


def _structure_report(problem, structure):
    return {
        "precedents": {str(t): sorted(p) for t, p in structure.precedents.items()},
        "critical_pairs": [list(p) for p in structure.critical_pairs],
        "partially_nested": structure.partially_nested,
    }


def _certificates(problem, structure, tol, report):
    try:
        certs = certify_substitutability(problem, structure, tol)
    except AssumptionViolated as exc:
        report["substitutability"] = {
            "certified": False,
            "failing_pairs": [list(p) for p in exc.details.get("pairs", [])],
            "message": str(exc),
        }
        raise _Exit(EXIT_ASSUMPTION, report) from None
    report["substitutability"] = {
        "certified": True,
        "certificates": [
            {"s": c.s, "t": c.t, "k": c.k, "Lambda": io.matrix_to_json(c.lambda_kst),
             "residual": c.containment_residual}
            for c in certs.values()
        ],
    }
    return certs


def cmd_analyze(args) -> dict:
    report = {"command": "analyze", "input": str(args.input)}
    problem = _load_team(args, report)
    structure = analyze_precedence(problem)
    report["structure"] = _structure_report(problem, structure)
    if structure.partially_nested:
        report["summary"] = "partially nested; nothing to do"
        return report
    certs = _certificates(problem, structure, _tol(args), report)
    parts = [f"critical pair ({s},{t}); substituting member {c.k}" for (s, t), c in sorted(certs.items())]
    report["summary"] = "not partially nested; " + "; ".join(parts)
    return report


def cmd_solve_team(args) -> dict:
    tol = _tol(args)
    report = {"command": "solve-team", "input": str(args.input)}
    problem = _load_team(args, report)
    structure = analyze_precedence(problem)
    report["structure"] = _structure_report(problem, structure)
    certs = _certificates(problem, structure, tol, report) if not structure.partially_nested else {}
    expanded = expand(problem, structure)
    static_obs = to_static(expanded)
    pi = io.load_pi_override(args.pi_override) if args.pi_override else None
    try:
        static = solve_static(problem, static_obs, tol, pi=pi)
    except AssumptionViolated as exc:
        report["error"] = str(exc)
        raise _Exit(EXIT_ASSUMPTION, report) from None
    gamma0 = realize_static_strategy(expanded, static)
    cost_expanded = expected_cost(expanded, gamma0)
    report["static"] = {
        "Pi": {str(i): io.matrix_to_json(p) for i, p in static.pi.items()},
        "system_residual": static.system_residual,
        "selection": "override" if pi is not None else "minimum-norm",
    }
    report["expanded_strategy"] = io.strategy_to_dict(gamma0)
    report["initial_violations"] = {str(i): sorted(v) for i, v in violations(gamma0, expanded, args.prune).sets.items()}
    try:
        final, trace = remove_violations(
            gamma0, expanded, certs, drift_checks=not args.no_drift_checks, drift_tol=args.tol, threshold=args.prune
        )
    except InvarianceBroken as exc:
        report["error"] = str(exc)
        raise _Exit(EXIT_INVARIANCE, report) from None
    cost_final = expected_cost(problem, final)
    report["trace"] = trace.to_records()
    report["final_strategy"] = io.strategy_to_dict(final)
    report["costs"] = {"expanded": cost_expanded, "original": cost_final, "difference": abs(cost_final - cost_expanded)}
    if abs(cost_final - cost_expanded) > 1e-7 * (1 + abs(cost_expanded)):
        report["error"] = "final strategy cost differs from the expanded optimum"
        raise _Exit(EXIT_INVARIANCE, report)
    return report


def _load_lqg(args, report):
    raw = io.load_json(args.input)
    problem = io.lqg_from_dict(raw)
    allow_psd = bool(args.allow_psd_noise or raw.get("allow_psd_noise", False))
    bad = validate_lqg(problem, allow_psd)
    if bad:
        report["errors"] = bad
        raise _Exit(EXIT_PARSE, report)
    return problem, allow_psd


def _synthesize(problem, allow_psd, tol, report):
    try:
        return synthesize(problem, allow_psd, tol)
    except AssumptionViolated as exc:
        report["substitutability"] = {
            "certified": False,
            "failing_controllers": exc.details.get("controllers", []),
            "message": str(exc),
        }
        raise _Exit(EXIT_ASSUMPTION, report) from None


def _simulation_report(res):
    return {
        "seed": res.seed,
        "paths": res.paths,
        "mode": res.mode,
        "mean_centralized": res.mean_centralized,
        "stderr_centralized": res.stderr_centralized,
        "mean_decentralized": res.mean_decentralized,
        "stderr_decentralized": res.stderr_decentralized,
        "max_sum_residual": res.max_sum_residual,
    }


def cmd_solve_lqg(args) -> dict:
    tol = _tol(args)
    report = {"command": "solve-lqg", "input": str(args.input)}
    problem, allow_psd = _load_lqg(args, report)
    schedule = _synthesize(problem, allow_psd, tol, report)
    report["substitutability"] = {"certified": True}
    report["schedule"] = io.schedule_to_dict(schedule)
    report["decentralized_gains"] = [[io.matrix_to_json(g) for g in row] for row in decentralized_gains(schedule)]
    c_cost = exact_cost(problem, schedule, "centralized")
    d_cost = exact_cost(problem, schedule, "decentralized")
    ident = sum_identity_residual(problem, schedule)
    report["costs"] = {"centralized": c_cost, "decentralized": d_cost, "difference": abs(c_cost - d_cost)}
    report["row_sum_identity_residual"] = ident
    if problem.n == 1:
        report["note"] = "single controller: decentralized and centralized laws coincide"
    try:
        res = simulate(problem, schedule, "both", args.paths, args.seed, record=_is_perfect_obs(problem))
    except InvarianceBroken as exc:
        report["error"] = str(exc)
        raise _Exit(EXIT_INVARIANCE, report) from None
    report["simulation"] = _simulation_report(res)
    if res.trajectories is not None:
        report["perfect_observation"] = {
            "coordinate_embedding_max_error": _embedding_error(problem, res.trajectories),
            "note": "each controller observes its own state coordinates; S^i_t embeds X^i_t",
        }
    if abs(c_cost - d_cost) > 1e-9 * max(1.0, abs(c_cost)) or ident > 1e-12:
        report["error"] = "decentralized cost differs from the centralized optimum"
        raise _Exit(EXIT_INVARIANCE, report)
    return report


def _is_perfect_obs(problem) -> bool:
    c = problem.C
    return c.shape[0] == c.shape[1] and np.array_equal(c, np.eye(c.shape[0])) and not np.any(problem.sigma_v)


def _embedding_error(problem, traj) -> float:
    x, s = traj["x"], traj["s"]   # (T, paths, d_x), (T, n, paths, d_x)
    err = 0.0
    for i, sl in enumerate(problem.y_slices()):
        emb = np.zeros_like(x)
        emb[..., sl] = x[..., sl]
        err = max(err, float(np.abs(s[:, i] - emb).max()))
    return err


def cmd_simulate(args) -> dict:
    report = {"command": "simulate", "input": str(args.input)}
    problem, allow_psd = _load_lqg(args, report)
    schedule = _synthesize(problem, allow_psd, _tol(args), report)
    try:
        res = simulate(problem, schedule, args.mode, args.paths, args.seed)
    except InvarianceBroken as exc:
        report["error"] = str(exc)
        raise _Exit(EXIT_INVARIANCE, report) from None
    report["simulation"] = _simulation_report(res)
    return report


def cmd_generate(args) -> dict:
    dims = {"n": args.n, "d": args.d, "T": args.T}
    try:
        problem = generate_random_problem(args.kind, dims, args.seed)
    except ValueError as exc:
        raise _Exit(EXIT_PARSE, {"command": "generate", "error": str(exc)}) from None
    return problem


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-9, help="absolute and relative tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--paths", type=int, default=1000, help="Monte Carlo paths")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--pi-override", help="JSON file with a static solution Pi to use instead of minimum-norm")
    common.add_argument("--allow-psd-noise", action="store_true", help="accept singular observation noise")
    common.add_argument("--no-drift-checks", action="store_true", help="skip per-iteration invariance checks")
    common.add_argument("--prune", type=float, default=0.0,
                        help="ignore strategy coefficients at or below this magnitude when counting violations")

    parser = argparse.ArgumentParser(prog="teamsub", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("analyze", cmd_analyze, "precedence structure and substitutability certificates"),
        ("solve-team", cmd_solve_team, "optimal linear strategy implementable in the original structure"),
        ("solve-lqg", cmd_solve_lqg, "centralized and decentralized LQG gains, costs and simulation"),
        ("simulate", cmd_simulate, "Monte Carlo simulation of an LQG problem"),
    ):
        p = sub.add_parser(name, help=helptext, parents=[common])
        p.add_argument("input", help="problem file (JSON)")
        p.set_defaults(func=fn)
        if name == "simulate":
            p.add_argument("--mode", choices=["centralized", "decentralized", "both"], default="both")
    g = sub.add_parser("generate", help="random instance satisfying substitutability", parents=[common])
    g.add_argument("--kind", choices=["team", "lqg"], required=True)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int, help="d_xi for teams, d_x for LQG")
    g.add_argument("--T", type=int)
    g.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.paths < 1 or args.tol <= 0:
        parser.error("--paths must be >= 1 and --tol > 0")
    start = time.perf_counter()
    code = EXIT_OK
    caught = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = args.func(args)
    except _Exit as exc:
        code, report = exc.code, exc.report
    except ParseError as exc:
        code, report = EXIT_PARSE, {"command": args.command, "error": str(exc)}
    except AssumptionViolated as exc:
        code, report = EXIT_ASSUMPTION, {"command": args.command, "error": str(exc)}
    except InvarianceBroken as exc:
        code, report = EXIT_INVARIANCE, {"command": args.command, "error": str(exc)}
    except TeamsubError as exc:
        code, report = EXIT_PARSE, {"command": args.command, "error": str(exc)}
    if caught and args.command != "generate":
        report["warnings"] = sorted({str(w.message) for w in caught})
    if args.command != "generate" or code != EXIT_OK:
        report["exit_code"] = code
        report["elapsed_seconds"] = time.perf_counter() - start
    text = io.dump_json(report, args.output)
    if args.output is None:
        print(text)
    if code != EXIT_OK:
        print(report.get("error") or report.get("substitutability", {}).get("message") or "failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
