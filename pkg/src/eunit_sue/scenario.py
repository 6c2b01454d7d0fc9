"""Scenario files, data ingestion, result serialisation.

A scenario is a JSON file:

    {
      "network": "links.csv",          // required; CSV from,to,fftt,capacity[,alpha,beta]
      "demand": "demand.csv",          // required; CSV origin,destination,demand
      "routes": "routes.csv",          // optional; CSV origin,destination,route_id,link_ids
                                        //   (link_ids are ';'-separated, ids are 1-based rows
                                        //   of the links file); otherwise routes are enumerated
      "model": "eunit",                // eunit | bsue | mnl-sue | due
      "params": {"b": 1.0},            // eunit: b (number or {"*": global, "1-2": per-OD})
                                        //   or l/u pair; bsue: theta, rho; mnl-sue: dispersion
      "solver": {"step": "msa", ...},  // optional solver options
      "max_routes": 64,                // enumeration limits when no routes file
      "max_links": null,
      "seed": 0,
      "out": "results"                 // optional default output directory
    }

Results are written as deterministic CSV/JSON files: ``routes.csv``,
``links.csv``, ``bounds.csv``, ``summary.json`` and ``trace.csv``; identical
scenarios reproduce byte-identical files.  Wall time goes to a separate
``run_meta.json``, which sits outside the determinism contract.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .equilibrium import (
    EquilibriumSolution,
    EUnitSueSpec,
    SolverOptions,
    solve_bsue_fixed_point,
    solve_due,
    solve_eunit_sue,
    solve_mnl_sue,
)
from .errors import EUnitSueError, ScenarioError
from .network import OD, Link, Network, ODPair, Route, RouteSet, build_route_set

MODELS = ("eunit", "bsue", "mnl-sue", "due")

_LINK_DEFAULTS = {"alpha": 0.15, "beta": 4.0}


# --- CSV ingestion ---------------------------------------------------------------


def _read_rows(path: Path, required: tuple[str, ...]) -> list[dict[str, str]]:
    if not path.is_file():
        raise ScenarioError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ScenarioError(f"{path}: missing columns {missing}")
        return list(reader)


def _parse_float(path: Path, row_no: int, field_name: str, raw: str | None, default=None) -> float:
    if raw is None or raw.strip() == "":
        if default is None:
            raise ScenarioError(f"{path}, row {row_no}: {field_name} is required")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{path}, row {row_no}: {field_name}={raw!r} is not a number") from None


def _parse_int(path: Path, row_no: int, field_name: str, raw: str | None) -> int:
    try:
        return int(str(raw).strip())
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}, row {row_no}: {field_name}={raw!r} is not an integer") from None


def read_links_csv(path: Path) -> list[Link]:
    """Links file ``from,to,fftt,capacity[,alpha,beta]``; ids are 1-based row order."""
    links = []
    for i, row in enumerate(_read_rows(path, ("from", "to", "fftt", "capacity")), start=1):
        try:
            links.append(
                Link(
                    id=i,
                    tail=_parse_int(path, i, "from", row["from"]),
                    head=_parse_int(path, i, "to", row["to"]),
                    fftt=_parse_float(path, i, "fftt", row["fftt"]),
                    capacity=_parse_float(path, i, "capacity", row["capacity"]),
                    alpha=_parse_float(path, i, "alpha", row.get("alpha"), _LINK_DEFAULTS["alpha"]),
                    beta=_parse_float(path, i, "beta", row.get("beta"), _LINK_DEFAULTS["beta"]),
                )
            )
        except EUnitSueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"{path}, row {i}: {exc}") from None
    if not links:
        raise ScenarioError(f"{path}: no links")
    return links


def read_demand_csv(path: Path) -> list[ODPair]:
    out = []
    seen: set[OD] = set()
    for i, row in enumerate(_read_rows(path, ("origin", "destination", "demand")), start=1):
        o = _parse_int(path, i, "origin", row["origin"])
        d = _parse_int(path, i, "destination", row["destination"])
        if (o, d) in seen:
            raise ScenarioError(f"{path}, row {i}: duplicate OD ({o},{d})")
        seen.add((o, d))
        try:
            out.append(ODPair(o, d, _parse_float(path, i, "demand", row["demand"])))
        except EUnitSueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"{path}, row {i}: {exc}") from None
    if not out:
        raise ScenarioError(f"{path}: no demand rows")
    return out


def read_routes_csv(path: Path) -> dict[OD, list[Route]]:
    """Routes file ``origin,destination,route_id,link_ids``; per-OD ids must be 1..n."""
    staged: dict[OD, dict[int, Route]] = {}
    for i, row in enumerate(_read_rows(path, ("origin", "destination", "route_id", "link_ids")), start=1):
        o = _parse_int(path, i, "origin", row["origin"])
        d = _parse_int(path, i, "destination", row["destination"])
        rid = _parse_int(path, i, "route_id", row["route_id"])
        raw = (row["link_ids"] or "").strip()
        if not raw:
            raise ScenarioError(f"{path}, row {i}: link_ids is empty")
        try:
            link_ids = tuple(int(tok) for tok in raw.split(";"))
        except ValueError:
            raise ScenarioError(f"{path}, row {i}: link_ids={raw!r} is not ';'-separated integers") from None
        od_routes = staged.setdefault((o, d), {})
        if rid in od_routes:
            raise ScenarioError(f"{path}, row {i}: duplicate route_id {rid} for OD ({o},{d})")
        od_routes[rid] = Route(o, d, link_ids)
    table: dict[OD, list[Route]] = {}
    for od, by_id in staged.items():
        ids = sorted(by_id)
        if ids != list(range(1, len(ids) + 1)):
            raise ScenarioError(f"{path}: OD {od} route_ids must be 1..{len(ids)}, got {ids}")
        table[od] = [by_id[i] for i in ids]
    return table


# --- scenario ---------------------------------------------------------------------


@dataclass
class Scenario:
    """A fully loaded, validated unit of execution."""

    model: str
    params: dict[str, Any]
    options: SolverOptions
    network: Network
    demands: tuple[ODPair, ...]
    route_set: RouteSet
    seed: int = 0
    out_dir: Path | None = None
    network_path: Path | None = None
    demand_path: Path | None = None
    routes_path: Path | None = None
    notes: tuple[str, ...] = ()

    def input_hash(self) -> str:
        """Content hash over the input files and the canonical configuration."""
        h = hashlib.sha256()
        for p in (self.network_path, self.demand_path, self.routes_path):
            h.update(p.read_bytes() if p is not None and p.is_file() else b"")
            h.update(b"\x00")
        config = {
            "model": self.model,
            "params": _canonical_params(self.params),
            "seed": self.seed,
            "solver": {
                "max_iterations": self.options.max_iterations,
                "flow_tolerance": self.options.flow_tolerance,
                "kkt_tolerance": self.options.kkt_tolerance,
                "inner_tolerance": self.options.inner_tolerance,
                "step": self.options.step_rule,
                "init": self.options.init,
                "seed": self.options.seed,
            },
        }
        h.update(json.dumps(config, sort_keys=True).encode())
        return h.hexdigest()


def _canonical_params(params: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for key in sorted(params):
        value = params[key]
        if isinstance(value, Mapping):
            out[key] = {str(k): v for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
        else:
            out[key] = value
    return out


def _parse_od_key(key: str, field_name: str) -> OD:
    parts = key.split("-")
    if len(parts) != 2:
        raise ScenarioError(f"{field_name}: OD key {key!r} must look like 'origin-destination'")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise ScenarioError(f"{field_name}: OD key {key!r} must hold integers") from None


def _require_number(params: Mapping[str, Any], name: str, field_prefix: str) -> float:
    if name not in params:
        raise ScenarioError(f"{field_prefix}.{name}: required for this model")
    value = params[name]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(f"{field_prefix}.{name}: must be a number, got {value!r}")
    return float(value)


def _validate_params(model: str, params: Mapping[str, Any], demands) -> tuple[dict[str, Any], tuple[str, ...]]:
    """Model-specific parameter validation; returns (params, informational notes)."""
    notes: tuple[str, ...] = ()
    out: dict[str, Any] = dict(params)
    known = {
        "eunit": {"b", "l", "u"},
        "bsue": {"theta", "rho"},
        "mnl-sue": {"dispersion"},
        "due": set(),
    }[model]
    unknown = sorted(set(params) - known)
    if unknown:
        raise ScenarioError(f"params: unknown keys {unknown} for model {model!r}")
    if model == "eunit":
        if "l" in params or "u" in params:
            lo = _require_number(params, "l", "params")
            up = _require_number(params, "u", "params")
            if not up > lo:
                raise ScenarioError(
                    f"params.u: upper bound must exceed lower bound (u > l), got l={lo}, u={up}"
                )
            if "b" in params:
                raise ScenarioError("params.b: give either b or the l/u pair, not both")
            out = {"b": up - lo}
            notes += (f"bound range derived from (l={lo}, u={up})",)
        elif isinstance(params.get("b"), Mapping):
            resolved: dict[str, float] = {}
            for key, value in params["b"].items():
                if key != "*":
                    _parse_od_key(str(key), "params.b")
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise ScenarioError(f"params.b[{key!r}]: must be a number")
                if value < 0:
                    raise ScenarioError(f"params.b[{key!r}]: must be >= 0")
                resolved[str(key)] = float(value)
            demanded = [d.od for d in demands if d.demand > 0]
            missing = [od for od in demanded if f"{od[0]}-{od[1]}" not in resolved and "*" not in resolved]
            if missing:
                raise ScenarioError(f"params.b: no value for ODs {missing} and no '*' default")
            out = {"b": resolved}
        else:
            b = _require_number(params, "b", "params")
            if b < 0:
                raise ScenarioError(f"params.b: must be >= 0, got {b}")
            out = {"b": b}
        if _eunit_all_zero(out["b"], demands):
            notes += ("bound range is 0: scenario runs the DUE solver",)
    elif model == "bsue":
        theta = _require_number(params, "theta", "params")
        rho = _require_number(params, "rho", "params")
        if theta <= 0:
            raise ScenarioError(f"params.theta: must be > 0, got {theta}")
        if rho < 0:
            raise ScenarioError(f"params.rho: must be >= 0, got {rho}")
        out = {"theta": theta, "rho": rho}
    elif model == "mnl-sue":
        dispersion = _require_number(params, "dispersion", "params")
        if dispersion <= 0:
            raise ScenarioError(f"params.dispersion: must be > 0, got {dispersion}")
        out = {"dispersion": dispersion}
    return out, notes


def _eunit_all_zero(b: float | Mapping[str, float], demands) -> bool:
    if isinstance(b, Mapping):
        demanded = [d.od for d in demands if d.demand > 0]
        return all(_resolve_bound(b, od) == 0 for od in demanded)
    return b == 0


def _resolve_bound(b: float | Mapping[str, float], od: OD) -> float:
    if isinstance(b, Mapping):
        key = f"{od[0]}-{od[1]}"
        return float(b[key]) if key in b else float(b["*"])
    return float(b)


def eunit_bound_map(scenario: Scenario) -> dict[OD, float]:
    b = scenario.params["b"]
    return {d.od: _resolve_bound(b, d.od) for d in scenario.demands if d.demand > 0}


def _solver_options(raw: Mapping[str, Any] | None) -> SolverOptions:
    if raw is None:
        return SolverOptions()
    if not isinstance(raw, Mapping):
        raise ScenarioError("solver: must be an object")
    mapping = {
        "max_iterations": "max_iterations",
        "flow_tolerance": "flow_tolerance",
        "kkt_tolerance": "kkt_tolerance",
        "inner_tolerance": "inner_tolerance",
        "step": "step_rule",
        "init": "init",
        "seed": "seed",
    }
    unknown = sorted(set(raw) - set(mapping))
    if unknown:
        raise ScenarioError(f"solver: unknown keys {unknown}")
    kwargs = {mapping[k]: raw[k] for k in raw}
    try:
        return SolverOptions(**kwargs)
    except EUnitSueError as exc:
        raise ScenarioError(f"solver: {exc}") from None


def scenario_from_dict(data: Mapping[str, Any], base_dir: Path) -> Scenario:
    """Build and validate a scenario from parsed JSON-style data."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario: top level must be an object")
    for required in ("network", "demand", "model"):
        if required not in data:
            raise ScenarioError(f"{required}: required field missing")
    model = data["model"]
    if model not in MODELS:
        raise ScenarioError(f"model: must be one of {MODELS}, got {model!r}")
    network_path = (base_dir / str(data["network"])).resolve()
    demand_path = (base_dir / str(data["demand"])).resolve()
    routes_path = (base_dir / str(data["routes"])).resolve() if data.get("routes") else None

    network = Network(read_links_csv(network_path))
    demands = tuple(read_demand_csv(demand_path))
    for d in demands:
        for node, role in ((d.origin, "origin"), (d.destination, "destination")):
            if node not in network.nodes:
                raise ScenarioError(f"demand: {role} node {node} not in network")

    max_routes = data.get("max_routes", 64)
    max_links = data.get("max_links")
    if not isinstance(max_routes, int) or max_routes < 1:
        raise ScenarioError(f"max_routes: must be a positive integer, got {max_routes!r}")
    if max_links is not None and (not isinstance(max_links, int) or max_links < 1):
        raise ScenarioError(f"max_links: must be a positive integer or null, got {max_links!r}")

    if routes_path is not None:
        try:
            route_set = RouteSet(network, read_routes_csv(routes_path))
        except EUnitSueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"routes: {exc}") from None
        demanded = [d.od for d in demands if d.demand > 0]
        missing = [od for od in demanded if od not in route_set.ods]
        if missing:
            raise ScenarioError(f"routes: no routes for demanded ODs {missing}")
    else:
        try:
            route_set = build_route_set(network, demands, max_routes=max_routes, max_links=max_links)
        except EUnitSueError as exc:
            raise ScenarioError(f"routes: {exc}") from None

    params_raw = data.get("params", {})
    if not isinstance(params_raw, Mapping):
        raise ScenarioError("params: must be an object")
    params, notes = _validate_params(model, params_raw, demands)

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ScenarioError(f"seed: must be an integer, got {seed!r}")
    options = _solver_options(data.get("solver"))
    if options.seed == 0 and seed != 0:
        options = SolverOptions(
            max_iterations=options.max_iterations,
            flow_tolerance=options.flow_tolerance,
            kkt_tolerance=options.kkt_tolerance,
            inner_tolerance=options.inner_tolerance,
            step_rule=options.step_rule,
            init=options.init,
            seed=seed,
        )
    out_dir = (base_dir / str(data["out"])).resolve() if data.get("out") else None
    return Scenario(
        model=model,
        params=params,
        options=options,
        network=network,
        demands=demands,
        route_set=route_set,
        seed=seed,
        out_dir=out_dir,
        network_path=network_path,
        demand_path=demand_path,
        routes_path=routes_path,
        notes=notes,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read, parse and fully validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"{path}: file not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data, path.parent.resolve())


def run_scenario(scenario: Scenario) -> EquilibriumSolution:
    """Dispatch the scenario to its solver."""
    if scenario.model == "eunit":
        spec = EUnitSueSpec(
            scenario.network,
            scenario.route_set,
            scenario.demands,
            eunit_bound_map(scenario),
            scenario.options,
        )
        solution = solve_eunit_sue(spec)
    elif scenario.model == "bsue":
        solution = solve_bsue_fixed_point(
            scenario.network,
            scenario.route_set,
            scenario.demands,
            scenario.params["theta"],
            scenario.params["rho"],
            scenario.options,
        )
    elif scenario.model == "mnl-sue":
        solution = solve_mnl_sue(
            scenario.network,
            scenario.route_set,
            scenario.demands,
            scenario.params["dispersion"],
            scenario.options,
        )
    elif scenario.model == "due":
        solution = solve_due(scenario.network, scenario.route_set, scenario.demands, scenario.options)
    else:  # pragma: no cover - guarded by validation
        raise ScenarioError(f"model: unknown model {scenario.model!r}")
    solution.notes = tuple(scenario.notes) + solution.notes
    return solution


# --- result serialisation -----------------------------------------------------------


@dataclass
class ResultBundle:
    """Solution tables ready for deterministic serialisation."""

    model: str
    routes_rows: list[tuple]
    links_rows: list[tuple]
    bounds_rows: list[tuple]
    trace_rows: list[tuple]
    summary: dict[str, Any]
    wall_time: float = 0.0

    @classmethod
    def from_solution(
        cls,
        scenario: Scenario,
        solution: EquilibriumSolution,
        wall_time: float = 0.0,
    ) -> "ResultBundle":
        rs = solution.route_set
        f = solution.flow.route_flows
        g = solution.flow.route_times
        p = solution.probabilities
        routes_rows = []
        demand_of = {d.od: d.demand for d in solution.demands}
        for od in rs.ods:
            sl = rs.slice_for(od)
            q = demand_of.get(od, 0.0)
            total_p = 0.0
            for j, route in enumerate(rs.routes_for(od), start=1):
                idx = sl.start + j - 1
                total_p += p[idx]
                routes_rows.append(
                    (od[0], od[1], j, ";".join(str(l) for l in route.link_ids), f[idx], g[idx], p[idx])
                )
            if q > 0:
                flow_sum = float(f[sl].sum())
                if abs(flow_sum - q) > 1e-9 * max(1.0, q):
                    raise ScenarioError(
                        f"OD {od}: route flows sum to {flow_sum}, demand is {q}"
                    )
                if abs(total_p - 1.0) > 1e-9:
                    raise ScenarioError(f"OD {od}: probabilities sum to {total_p}")
        links_rows = [
            (lk.id, lk.tail, lk.head, solution.flow.link_flows[i], solution.flow.link_times[i])
            for i, lk in enumerate(scenario.network.links)
        ]
        bounds_rows = []
        if solution.bounds is not None:
            upper = solution.bounds.upper
            for od in sorted(solution.bounds.lower):
                bounds_rows.append(
                    (od[0], od[1], solution.bounds.kind, solution.bounds.lower[od], upper[od])
                )
        trace_rows = [(k, z, r) for (k, z, r) in solution.trace]
        summary = {
            "model": solution.model,
            "objective": solution.objective,
            "z1": solution.z1,
            "z2": solution.z2,
            "kkt_residual": solution.kkt_residual,
            "iterations": solution.iterations,
            "converged": solution.converged,
            "n_ods": len(rs.ods),
            "n_routes": rs.n_routes,
            "n_links": scenario.network.n_links,
            "total_demand": sum(d.demand for d in solution.demands),
            "seed": scenario.seed,
            "input_hash": scenario.input_hash(),
            "notes": list(solution.notes),
        }
        return cls(
            model=solution.model,
            routes_rows=routes_rows,
            links_rows=links_rows,
            bounds_rows=bounds_rows,
            trace_rows=trace_rows,
            summary=summary,
            wall_time=wall_time,
        )


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _fmt_sci(x: float) -> str:
    return f"{x:.6e}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_results(bundle: ResultBundle, out_dir: str | Path) -> list[Path]:
    """Write the result file set; reruns of identical scenarios are byte-identical.

    Flows, times, probabilities and bounds use fixed 6-decimal formatting;
    objective and residual columns use 6-digit scientific notation so small
    residuals stay visible.
    """
    if not bundle.routes_rows:
        raise ScenarioError("refusing to write an empty result bundle")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    lines = ["origin,destination,route_id,link_ids,flow,time,probability"]
    for o, d, rid, link_ids, flow, g, p in bundle.routes_rows:
        lines.append(f"{o},{d},{rid},{link_ids},{_fmt(flow)},{_fmt(g)},{_fmt(p)}")
    paths.append(out / "routes.csv")
    _write_atomic(paths[-1], "\n".join(lines) + "\n")

    lines = ["link,from,to,flow,time"]
    for lid, tail, head, v, t in bundle.links_rows:
        lines.append(f"{lid},{tail},{head},{_fmt(v)},{_fmt(t)}")
    paths.append(out / "links.csv")
    _write_atomic(paths[-1], "\n".join(lines) + "\n")

    lines = ["origin,destination,kind,lower,upper"]
    for o, d, kind, lo, up in bundle.bounds_rows:
        lines.append(f"{o},{d},{kind},{_fmt(lo)},{_fmt(up)}")
    paths.append(out / "bounds.csv")
    _write_atomic(paths[-1], "\n".join(lines) + "\n")

    lines = ["iteration,objective,residual"]
    for k, z, r in bundle.trace_rows:
        lines.append(f"{k},{_fmt_sci(z)},{_fmt_sci(r)}")
    paths.append(out / "trace.csv")
    _write_atomic(paths[-1], "\n".join(lines) + "\n")

    paths.append(out / "summary.json")
    _write_atomic(paths[-1], json.dumps(bundle.summary, sort_keys=True, indent=2) + "\n")

    # wall time is intentionally outside the determinism contract
    meta = out / "run_meta.json"
    _write_atomic(meta, json.dumps({"wall_time_s": bundle.wall_time}, sort_keys=True) + "\n")
    return paths


def solve_and_write(scenario: Scenario, out_dir: str | Path) -> tuple[EquilibriumSolution, list[Path]]:
    start = time.perf_counter()
    solution = run_scenario(scenario)
    wall = time.perf_counter() - start
    bundle = ResultBundle.from_solution(scenario, solution, wall_time=wall)
    return solution, write_results(bundle, out_dir)
