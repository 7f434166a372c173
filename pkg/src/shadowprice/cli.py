"""Command-line front end.

Commands: solve, dual, shadow, minimax, saddle, examples, verify-all.
Exit codes: 0 success, 2 model validation failure, 3 solver
non-convergence, 4 verification failure (gap or violation above the
tolerance).  All JSON output is key-sorted so identical configurations
produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .acceptance import format_table, run_acceptance
from .dual import certificate_to_dict, shadow_price_pipeline
from .examples import ExampleDescriptor, build
from .minimax import GridSpec, brute_force_minimax
from .primal import (
    STATUS_INFEASIBLE,
    STATUS_MAX_ITER,
    STATUS_OPTIMAL,
    STATUS_UNBOUNDED,
    PrimalProblem,
    detect_arbitrage,
    solve_frictionless,
    solve_primal,
)
from .relaxation import OnePeriodModel, Scenario, saddle_point_conditions, verify_saddle
from .tree import AdaptedProcess, ModelError, load_model, model_to_dict
from .utility import AlmostConvergentSequence, ConfigurationError, utility_from_dict, utility_to_dict

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_VERIFICATION = 4


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, AdaptedProcess):
        return {k: obj.values[k] for k in sorted(obj.values)}
    if isinstance(obj, AlmostConvergentSequence):
        return {"preamble": list(obj.preamble), "period": list(obj.period)}
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float):
        if obj == float("inf"):
            return "inf"
        if obj == float("-inf"):
            return "-inf"
        return obj
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(payload: dict, args, tree=None) -> None:
    if args.format == "csv":
        text = _to_csv(payload, tree)
    else:
        text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    if args.out and args.out != "-":
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(payload: dict, tree) -> str:
    """Per-node series as (node_id, t, value) rows; scalars become comments."""
    t_of = {}
    if tree is not None:
        t_of = {n.id: n.t for n in tree.nodes}
    lines = []
    series = []
    for key in sorted(payload):
        val = payload[key]
        if isinstance(val, AdaptedProcess):
            val = val.values
        if isinstance(val, dict) and val and all(k in t_of for k in val):
            series.append((key, val))
        else:
            lines.append(f"# {key} = {json.dumps(_jsonable(val), sort_keys=True)}")
    for name, val in series:
        lines.append(f"# series: {name}")
        lines.append("node_id,t,value")
        for nid in sorted(val):
            lines.append(f"{nid},{t_of[nid]},{_jsonable(float(val[nid]))}")
    return "\n".join(lines) + "\n"


def _read_model_json(args) -> dict:
    if not args.model or args.model == "-":
        return json.load(sys.stdin)
    with open(args.model) as fh:
        return json.load(fh)


def _problem_from_args(args) -> tuple[PrimalProblem, dict]:
    data = _read_model_json(args)
    tree, market, rest = load_model(data)
    if "utility" not in rest:
        raise ModelError("model file must carry a 'utility' section")
    phi = utility_from_dict(rest["utility"])
    constraints = None
    if rest.get("constraints"):
        constraints = {
            str(k): (float(v[0]), float(v[1])) for k, v in rest["constraints"].items()
        }
    problem = PrimalProblem(tree, market, phi, constraints=constraints)
    problem.validate()
    return problem, rest


def _cmd_solve(args) -> int:
    problem, _rest = _problem_from_args(args)
    sol = solve_primal(problem)
    payload = {
        "command": "solve",
        "status": sol.status,
        "lambda": sol.lambda_,
        "gamma": sol.gamma_star.gamma if sol.gamma_star else None,
        "residuals": sol.residuals,
        "tolerances": {"tol_gap": problem.options.tol_gap, "tol_kkt": problem.options.tol_kkt},
    }
    _emit(payload, args, problem.tree)
    if sol.status in (STATUS_MAX_ITER, STATUS_INFEASIBLE):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_dual(args) -> int:
    from .dual import solve_dual

    problem, _rest = _problem_from_args(args)
    sol = solve_dual(problem)
    payload = {
        "command": "dual",
        "status": sol.status,
        "value": sol.value,
        "z1": sol.variable.z1 if sol.variable else None,
        "z2": sol.variable.z2 if sol.variable else None,
        "residuals": getattr(sol, "residuals", None) or {},
        "tolerances": {"tol_gap": problem.options.tol_gap},
    }
    _emit(payload, args, problem.tree)
    if sol.status not in (STATUS_OPTIMAL,):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_shadow(args) -> int:
    problem, rest = _problem_from_args(args)
    tol = args.tol_gap
    if args.candidate == "paper":
        diags = rest.get("diagnostics") or {}
        if "candidate_price" not in diags:
            raise ModelError("model carries no diagnostics.candidate_price for --candidate paper")
        s_star = AdaptedProcess(
            {str(k): float(v) for k, v in diags["candidate_price"].items()},
            0,
            problem.tree.horizon,
        )
        s_star.validate(problem.tree)
        primal = solve_primal(problem)
        arb = detect_arbitrage(problem.tree, s_star)
        # the candidate is checked in the unconstrained market
        frictionless = solve_frictionless(problem.tree, s_star, problem.phi)
        mu = frictionless.lambda_
        unbounded = frictionless.status == STATUS_UNBOUNDED or not np.isfinite(mu)
        gap = float("inf") if unbounded else abs(mu - primal.lambda_)
        payload = {
            "command": "shadow",
            "candidate": "paper",
            "lambda": primal.lambda_,
            "mu_s_star": mu,
            "gap": gap,
            "arbitrage_at_candidate": bool(arb.arbitrage),
            "s_star": s_star,
            "tolerance": tol,
        }
        if unbounded:
            payload["note"] = "unbounded frictionless value: candidate is not a shadow price"
        _emit(payload, args, problem.tree)
        if primal.status in (STATUS_MAX_ITER, STATUS_INFEASIBLE):
            return EXIT_NO_CONVERGENCE
        if unbounded or gap > tol:
            return EXIT_VERIFICATION
        return EXIT_OK

    dual, cert = shadow_price_pipeline(problem)
    payload = certificate_to_dict(cert)
    payload.update(
        {
            "command": "shadow",
            "dual_value": dual.value,
            "dual_status": dual.status,
            "primal_status": cert.primal.status,
            "tolerance": tol,
        }
    )
    payload["s_star"] = cert.s_star
    _emit(payload, args, problem.tree)
    if dual.status != STATUS_OPTIMAL or cert.primal.status != STATUS_OPTIMAL:
        return EXIT_NO_CONVERGENCE
    if not np.isfinite(cert.gap) or cert.gap > tol:
        return EXIT_VERIFICATION
    return EXIT_OK


def _parse_gamma_grid(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise ModelError(f"bad --grid-gamma {text!r}, expected lo:hi:points") from None


def _cmd_minimax(args) -> int:
    problem, _rest = _problem_from_args(args)
    g_lo, g_hi, g_n = _parse_gamma_grid(args.grid_gamma)
    spec = GridSpec(
        s_points=args.grid_s,
        gamma_interval=(g_lo, g_hi),
        gamma_points=g_n,
        budget=args.budget,
    )
    res = brute_force_minimax(problem, spec)
    payload = {
        "command": "minimax",
        "supinf": res.supinf,
        "infsup": res.infsup,
        "argmin_s": res.argmin_s,
        "grid_tolerance": res.tolerance,
        "corner_identity_gap": res.corner_identity_gap,
    }
    _emit(payload, args, problem.tree)
    if res.supinf > res.infsup + res.tolerance:
        return EXIT_VERIFICATION
    return EXIT_OK


def _one_period_from_dict(data: dict) -> OnePeriodModel:
    try:
        scenarios = tuple(
            Scenario(float(s["p"]), float(s["bid1"]), float(s["ask1"]))
            for s in data["scenarios"]
        )
        s0 = float(data["s0"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"bad one-period model: {exc}") from None
    phi = utility_from_dict(data.get("utility", {"kind": "log"}))
    if phi.banach_weight != 0.0:
        raise ModelError("one-period saddle machinery uses a plain expected utility")
    return OnePeriodModel(s0, scenarios, phi.scalar)


def _cmd_saddle(args) -> int:
    model = _one_period_from_dict(_read_model_json(args))
    gamma, s1, branch = saddle_point_conditions(model)
    g_lo, g_hi, g_n = _parse_gamma_grid(args.grid_gamma)
    report = verify_saddle(model, gamma, s1, gamma_grid=(g_lo, g_hi, g_n), s_points=args.grid_s)
    payload = {
        "command": "saddle",
        "gamma_star": gamma,
        "s1_star": list(s1),
        "branch": branch,
        "saddle_value": report.saddle_value,
        "gamma_violation": report.gamma_violation,
        "price_violation": report.price_violation,
        "tolerance": args.tol_gap,
    }
    _emit(payload, args)
    if not report.passes(args.tol_gap):
        return EXIT_VERIFICATION
    return EXIT_OK


def _cmd_examples(args) -> int:
    if args.action != "build":
        raise ModelError(f"unknown examples action {args.action!r}")
    desc = ExampleDescriptor(args.name, n=args.n, K=args.K, N=args.N, quad=args.quad)
    ex = build(desc)
    if ex.one_period is not None:
        payload = {
            "s0": ex.one_period.s0,
            "scenarios": [
                {"p": s.p, "bid1": s.bid1, "ask1": s.ask1} for s in ex.one_period.scenarios
            ],
            "utility": {"kind": ex.one_period.u.kind, "param": ex.one_period.u.param},
            "diagnostics": ex.diagnostics,
        }
        _emit(payload, args)
        return EXIT_OK
    problem = ex.problem
    extra = {
        "utility": utility_to_dict(problem.phi),
        "diagnostics": ex.diagnostics,
    }
    if problem.constraints:
        extra["constraints"] = {k: list(v) for k, v in problem.constraints.items()}
    payload = model_to_dict(problem.tree, problem.market, extra)
    _emit(payload, args, problem.tree)
    return EXIT_OK


def _cmd_verify_all(args) -> int:
    results = run_acceptance(args.seed)
    table = format_table(results)
    print(table)
    if args.out and args.out != "-":
        payload = {
            "command": "verify-all",
            "seed": args.seed,
            "criteria": {r.name: bool(r.passed) for r in results},
        }
        with open(args.out, "w") as fh:
            fh.write(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")
    if all(r.passed for r in results):
        return EXIT_OK
    return EXIT_VERIFICATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowprice")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", default="-", help="model JSON path, '-' for stdin")
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--tol-gap", type=float, default=1e-6, dest="tol_gap")

    p = sub.add_parser("solve", help="frictional utility maximization")
    common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("dual", help="dual optimization over consistent price systems")
    common(p)
    p.set_defaults(func=_cmd_dual)

    p = sub.add_parser("shadow", help="shadow price extraction and verification")
    common(p)
    p.add_argument(
        "--candidate",
        choices=("dual", "paper"),
        default="dual",
        help="'dual' extracts from the dual optimizer, 'paper' verifies the "
        "candidate price shipped in the model diagnostics",
    )
    p.set_defaults(func=_cmd_shadow)

    p = sub.add_parser("minimax", help="brute-force sup-inf / inf-sup comparison")
    common(p)
    p.add_argument("--grid-s", type=int, default=5, dest="grid_s")
    p.add_argument("--grid-gamma", default="-2:2:41", dest="grid_gamma")
    p.add_argument("--budget", type=int, default=10**7)
    p.set_defaults(func=_cmd_minimax)

    p = sub.add_parser("saddle", help="one-period saddle point and grid verification")
    common(p)
    p.add_argument("--grid-s", type=int, default=200, dest="grid_s")
    p.add_argument("--grid-gamma", default="-2:2:200", dest="grid_gamma")
    p.set_defaults(func=_cmd_saddle)

    p = sub.add_parser("examples", help="emit a built-in instance as model JSON")
    p.add_argument("action", choices=("build",))
    p.add_argument("name", choices=("example3", "example4", "example5"))
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--K", type=int, default=6)
    p.add_argument("--N", type=int, default=10)
    p.add_argument("--quad", type=int, default=8)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_examples)

    p = sub.add_parser("verify-all", help="run the acceptance suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_verify_all)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
