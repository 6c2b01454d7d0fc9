"""Command-line interface.

Subcommands:

* ``validate`` -- parse and check a scenario without solving;
* ``solve``    -- run one scenario and write the result file set;
* ``sweep``    -- vary one parameter over a range, one result set per point;
* ``curves``   -- probability-versus-x tables for all four choice models;
* ``compare``  -- run the bounded-perception and bounded-choice models on the
                  same scenario and emit joined tables;
* ``harness``  -- replication suites and oracle batteries.

Exit codes: 0 success, 1 usage or validation error, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ._backend import KERNEL_BACKEND
from .choice import bc_prob, eunit_prob, mnl_prob, mnw_prob
from .errors import EUnitSueError
from .harness import run_nguyen_dupuis_suite, run_oracle_suites, run_three_route_suite
from .scenario import (
    ResultBundle,
    Scenario,
    load_scenario,
    run_scenario,
    scenario_from_dict,
    solve_and_write,
    write_results,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors instead of argparse's 2
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _build_parser() -> _Parser:
    parser = _Parser(prog="eunit-sue", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_scenario_args(p, with_model=True):
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--network", help="links CSV (alternative to --scenario)")
        p.add_argument("--demand", help="demand CSV")
        p.add_argument("--routes", help="optional routes CSV")
        if with_model:
            p.add_argument("--model", choices=("eunit", "bsue", "mnl-sue", "due"))
        p.add_argument("--b", type=float, help="bound range (eunit)")
        p.add_argument("--theta", type=float, help="bounded-choice scale (bsue)")
        p.add_argument("--rho", type=float, help="bounded-choice threshold (bsue)")
        p.add_argument("--dispersion", type=float, help="logit dispersion (mnl-sue)")
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--tol", type=float, help="convergence tolerance")
        p.add_argument("--step", choices=("msa", "armijo"))
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    p_validate = sub.add_parser("validate", help="parse and check a scenario")
    add_scenario_args(p_validate)

    p_solve = sub.add_parser("solve", help="solve one scenario")
    add_scenario_args(p_solve)

    p_sweep = sub.add_parser("sweep", help="vary one parameter over a range")
    add_scenario_args(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=("b", "theta", "rho", "dispersion"))
    p_sweep.add_argument("--from", dest="start", type=float, required=True)
    p_sweep.add_argument("--to", dest="stop", type=float, required=True)
    p_sweep.add_argument("--steps", type=int, required=True)
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep points")

    p_curves = sub.add_parser("curves", help="choice probability curves for all four models")
    p_curves.add_argument("--out", required=True)
    p_curves.add_argument("--x-from", dest="x_from", type=float, default=5.0)
    p_curves.add_argument("--x-to", dest="x_to", type=float, default=24.0)
    p_curves.add_argument("--x-steps", dest="x_steps", type=int, default=77)
    p_curves.add_argument(
        "--offsets", default="5,0,10", help="route time offsets; times are x+offset"
    )
    p_curves.add_argument("--mnl-dispersion", type=float, default=1.0)
    p_curves.add_argument("--mnw-shape", type=float, default=2.5)
    p_curves.add_argument("--mnw-location", type=float, default=0.0)
    p_curves.add_argument("--bc-theta", type=float, default=1.0)
    p_curves.add_argument("--bc-rho", type=float, default=25.0)
    p_curves.add_argument("--eunit-l", type=float, default=4.75)
    p_curves.add_argument("--eunit-u", type=float, default=29.75)

    p_compare = sub.add_parser("compare", help="bounded-perception vs bounded-choice on one scenario")
    add_scenario_args(p_compare, with_model=False)

    p_harness = sub.add_parser("harness", help="replication suites")
    hsub = p_harness.add_subparsers(dest="suite", required=True)
    h3 = hsub.add_parser("three-route")
    h3.add_argument("--seed", type=int, default=0)
    h3.add_argument("--out", help="write the JSON report here")
    h3.add_argument("--strict-values", action="store_true")
    hnd = hsub.add_parser("nguyen-dupuis")
    hnd.add_argument("--demand", type=int, default=100, choices=(50, 100, 150))
    hnd.add_argument("--all", action="store_true", help="run all three demand levels")
    hnd.add_argument("--seed", type=int, default=0)
    hnd.add_argument("--out", help="write the JSON report here")
    hnd.add_argument("--strict-values", action="store_true")
    hor = hsub.add_parser("oracles")
    hor.add_argument("--seed", type=int, default=0)
    hor.add_argument("--fast", action="store_true")
    hor.add_argument("--out", help="write the JSON report here")
    return parser


def _scenario_from_args(args) -> Scenario:
    overrides: dict = {}
    params: dict = {}
    for key in ("b", "theta", "rho", "dispersion"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    solver: dict = {}
    if getattr(args, "max_iter", None) is not None:
        solver["max_iterations"] = args.max_iter
    if getattr(args, "tol", None) is not None:
        solver["kkt_tolerance"] = args.tol
    if getattr(args, "step", None) is not None:
        solver["step"] = args.step
    if args.scenario:
        scenario_path = Path(args.scenario)
        data = json.loads(scenario_path.read_text())
        base = scenario_path.parent.resolve()
    else:
        if not (getattr(args, "network", None) and getattr(args, "demand", None)):
            raise _UsageError("give --scenario or both --network and --demand")
        data = {"network": args.network, "demand": args.demand}
        if getattr(args, "routes", None):
            data["routes"] = args.routes
        base = Path.cwd()
    if getattr(args, "model", None):
        data["model"] = args.model
    if params:
        merged = dict(data.get("params", {}))
        merged.update(params)
        data["params"] = merged
    if solver:
        merged = dict(data.get("solver", {}))
        merged.update(solver)
        data["solver"] = merged
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "out", None):
        data["out"] = args.out
    if overrides:
        data.update(overrides)
    return scenario_from_dict(data, base)


def _cmd_validate(args) -> int:
    scenario = _scenario_from_args(args)
    print(
        f"scenario ok: model={scenario.model} ods={len(scenario.route_set.ods)} "
        f"routes={scenario.route_set.n_routes} links={scenario.network.n_links} "
        f"hash={scenario.input_hash()[:12]}"
    )
    for note in scenario.notes:
        print(f"note: {note}")
    return 0


def _cmd_solve(args, scenario: Scenario | None = None) -> int:
    scenario = scenario or _scenario_from_args(args)
    out_dir = scenario.out_dir or Path("results")
    solution, paths = solve_and_write(scenario, out_dir)
    print(
        f"model={solution.model} objective={solution.objective:.6f} "
        f"residual={solution.kkt_residual:.3e} iterations={solution.iterations} "
        f"converged={solution.converged}"
    )
    for note in solution.notes:
        print(f"note: {note}")
    print(f"results in {Path(out_dir).resolve()}")
    return 0 if solution.converged else 2


def _cmd_sweep(args) -> int:
    scenario = _scenario_from_args(args)
    values = np.linspace(args.start, args.stop, args.steps)
    out_dir = scenario.out_dir or Path("sweep")
    out_dir.mkdir(parents=True, exist_ok=True)
    base_data = json.loads(Path(args.scenario).read_text()) if args.scenario else None

    def run_point(idx_value):
        idx, value = idx_value
        if base_data is not None:
            data = json.loads(json.dumps(base_data))
            base = Path(args.scenario).parent.resolve()
        else:
            data = {"network": args.network, "demand": args.demand}
            if args.routes:
                data["routes"] = args.routes
            base = Path.cwd()
        data.setdefault("params", {})
        if args.model:
            data["model"] = args.model
        data["params"][args.param] = float(value)
        if args.param == "b":
            data.setdefault("model", "eunit")
        if getattr(args, "seed", None) is not None:
            data["seed"] = args.seed
        point_scenario = scenario_from_dict(data, base)
        solution = run_scenario(point_scenario)
        bundle = ResultBundle.from_solution(point_scenario, solution)
        write_results(bundle, out_dir / f"point_{idx:03d}")
        return idx, value, solution, point_scenario

    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [run_point((i, v)) for i, v in enumerate(values)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_point, enumerate(values)))
    results.sort(key=lambda r: r[0])

    worst_exit = 0
    lines = [
        "index,param,value,model,objective,z1,z2,residual,iterations,converged,used_routes,note"
    ]
    route_lines = ["value,origin,destination,route_id,flow,time,probability,variance"]
    bound_lines = ["value,origin,destination,kind,lower,upper"]
    for idx, value, solution, point_scenario in results:
        used = int(np.count_nonzero(solution.flow.route_flows > 0))
        note = "due-dispatch" if solution.model != point_scenario.model else ""
        lines.append(
            f"{idx},{args.param},{_fmt(value)},{solution.model},{solution.objective:.6e},"
            f"{solution.z1:.6e},{solution.z2:.6e},{solution.kkt_residual:.6e},"
            f"{solution.iterations},{str(solution.converged).lower()},{used},{note}"
        )
        rs = solution.route_set
        for od in rs.ods:
            sl = rs.slice_for(od)
            lo = up = None
            if solution.bounds is not None and od in solution.bounds.lower:
                lo = solution.bounds.lower[od]
                up = solution.bounds.upper[od]
                bound_lines.append(
                    f"{_fmt(value)},{od[0]},{od[1]},{solution.bounds.kind},{_fmt(lo)},{_fmt(up)}"
                )
            for j in range(sl.start, sl.stop):
                g = float(solution.flow.route_times[j])
                var = ""
                if solution.model == "eunit" and lo is not None and lo < g < up:
                    from .choice import eunit_variance

                    var = _fmt(eunit_variance(g, lo, up))
                route_lines.append(
                    f"{_fmt(value)},{od[0]},{od[1]},{j - sl.start + 1},"
                    f"{_fmt(solution.flow.route_flows[j])},{_fmt(g)},"
                    f"{_fmt(solution.probabilities[j])},{var}"
                )
        if not solution.converged:
            worst_exit = 2
    (out_dir / "sweep_routes.csv").write_text("\n".join(route_lines) + "\n")
    (out_dir / "sweep_bounds.csv").write_text("\n".join(bound_lines) + "\n")
    # index file written last
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"{len(values)} sweep points in {out_dir.resolve()}")
    return worst_exit


def _cmd_curves(args) -> int:
    offsets = tuple(float(tok) for tok in args.offsets.split(","))
    xs = np.linspace(args.x_from, args.x_to, args.x_steps)
    lines = ["x,route,time,mnl,mnw,bc,eunit"]
    for x in xs:
        times = np.array([x + o for o in offsets])
        p_mnl = mnl_prob(times, args.mnl_dispersion).probs
        p_mnw = mnw_prob(times, args.mnw_shape, args.mnw_location).probs
        p_bc = bc_prob(times, args.bc_theta, args.bc_rho).probs
        p_eu = eunit_prob(times, args.eunit_l, args.eunit_u).probs
        for r in range(len(offsets)):
            lines.append(
                f"{_fmt(x)},{r + 1},{_fmt(times[r])},{_fmt(p_mnl[r])},"
                f"{_fmt(p_mnw[r])},{_fmt(p_bc[r])},{_fmt(p_eu[r])}"
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "curves.csv"
    path.write_text("\n".join(lines) + "\n")
    print(f"curves table in {path.resolve()}")
    return 0


def _cmd_compare(args) -> int:
    if args.b is None or args.theta is None or args.rho is None:
        base_params = {}
        if args.scenario:
            base_params = json.loads(Path(args.scenario).read_text()).get("params", {})
        missing = [k for k in ("b", "theta", "rho") if getattr(args, k) is None and k not in base_params]
        if missing:
            raise _UsageError(f"compare needs parameters {missing} (flags or scenario params)")

    def scenario_for(model: str, keep: tuple[str, ...]) -> Scenario:
        ns = argparse.Namespace(**vars(args))
        ns.model = model
        for key in ("b", "theta", "rho", "dispersion"):
            if key not in keep:
                setattr(ns, key, None)
        scenario = _scenario_from_args(ns)
        return scenario

    sc_eunit = scenario_for("eunit", ("b",))
    sc_bsue = scenario_for("bsue", ("theta", "rho"))
    sol_eunit = run_scenario(sc_eunit)
    sol_bsue = run_scenario(sc_bsue)

    out_dir = sc_eunit.out_dir or Path("compare")
    out_dir.mkdir(parents=True, exist_ok=True)
    rs = sol_eunit.route_set
    lines = [
        "origin,destination,route_id,link_ids,eunit_flow,eunit_time,eunit_prob,"
        "bsue_flow,bsue_time,bsue_prob"
    ]
    for od in rs.ods:
        sl = rs.slice_for(od)
        for j, route in enumerate(rs.routes_for(od), start=1):
            idx = sl.start + j - 1
            lines.append(
                f"{od[0]},{od[1]},{j},{';'.join(str(l) for l in route.link_ids)},"
                f"{_fmt(sol_eunit.flow.route_flows[idx])},{_fmt(sol_eunit.flow.route_times[idx])},"
                f"{_fmt(sol_eunit.probabilities[idx])},"
                f"{_fmt(sol_bsue.flow.route_flows[idx])},{_fmt(sol_bsue.flow.route_times[idx])},"
                f"{_fmt(sol_bsue.probabilities[idx])}"
            )
    (out_dir / "compare_routes.csv").write_text("\n".join(lines) + "\n")
    lines = ["origin,destination,eunit_lower,eunit_upper,bsue_threshold"]
    for od in rs.ods:
        lines.append(
            f"{od[0]},{od[1]},{_fmt(sol_eunit.bounds.lower[od])},"
            f"{_fmt(sol_eunit.bounds.upper[od])},{_fmt(sol_bsue.bounds.upper[od])}"
        )
    (out_dir / "compare_bounds.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "eunit": {
            "objective": sol_eunit.objective,
            "residual": sol_eunit.kkt_residual,
            "converged": sol_eunit.converged,
        },
        "bsue": {
            "objective": sol_bsue.objective,
            "residual": sol_bsue.kkt_residual,
            "converged": sol_bsue.converged,
        },
    }
    (out_dir / "compare_summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"comparison tables in {out_dir.resolve()}")
    return 0 if (sol_eunit.converged and sol_bsue.converged) else 2


def _emit_report(report, out: str | None) -> int:
    for line in report.summary_lines():
        print(line)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
        print(f"report written to {path.resolve()}")
    return 0 if report.passed else 1


def _cmd_harness(args) -> int:
    if args.suite == "three-route":
        return _emit_report(
            run_three_route_suite(seed=args.seed, strict_values=args.strict_values), args.out
        )
    if args.suite == "nguyen-dupuis":
        levels = (50, 100, 150) if args.all else (args.demand,)
        code = 0
        for level in levels:
            report = run_nguyen_dupuis_suite(level, seed=args.seed, strict_values=args.strict_values)
            out = None
            if args.out:
                out = args.out if len(levels) == 1 else str(Path(args.out).with_suffix("")) + f"_{level}.json"
            code = max(code, _emit_report(report, out))
        return code
    if args.suite == "oracles":
        return _emit_report(run_oracle_suites(seed=args.seed, fast=args.fast), args.out)
    raise _UsageError(f"unknown harness suite {args.suite!r}")


def cli_dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "curves":
            return _cmd_curves(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "harness":
            return _cmd_harness(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except EUnitSueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
