"""Replication suites and oracle batteries with machine-readable reports.

Each suite materialises its packaged fixture through the scenario machinery,
runs the relevant solves and emits a list of claims.  Claims carry a kind:

* ``exact``       -- analytic/structural facts that must hold;
* ``statistical`` -- Monte-Carlo comparisons with a stated error budget;
* ``contingent``  -- numeric targets that depend on assumed fixture data
                     (tracked, and gating only when ``strict_values`` is set).

Reports are deterministic for a fixed seed.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from . import oracles
from .choice import ExpUniform, erum_choice_frequencies, eunit_prob, exp_uniform_moments, eunit_variance
from .equilibrium import (
    EUnitSueSpec,
    SolverOptions,
    eunit_gradient,
    eunit_objective,
    kkt_residual,
    solve_due,
    solve_eunit_sue,
    solve_inner_lower_bound,
)
from .errors import StructureError
from .fixtures import braess_bridge, nguyen_dupuis, three_route
from .network import Network, ODPair, Route, RouteSet, load_flows
from .scenario import run_scenario

# Published route-choice percentages (Table-1 layout): scenario -> OD -> row.
# Used for structural targets (zeros, dominant route) and contingent values.
EUNIT_TABLE = {
    50: {
        (1, 2): (0.00, 0.00, 1.79, 1.76, 87.84, 0.00, 8.61, 0.00),
        (4, 2): (0.00, 0.00, 0.12, 99.88, 0.00),
        (1, 3): (98.48, 0.00, 0.00, 0.00, 1.52, 0.00),
        (4, 3): (0.00, 0.00, 0.00, 99.75, 0.00, 0.25),
    },
    100: {
        (1, 2): (0.00, 0.00, 3.67, 1.03, 95.31, 0.00, 0.00, 0.00),
        (4, 2): (0.00, 0.00, 0.08, 99.92, 0.00),
        (1, 3): (83.58, 1.59, 4.23, 3.22, 3.69, 3.68),
        (4, 3): (0.00, 0.00, 0.00, 88.17, 0.00, 11.83),
    },
    150: {
        (1, 2): (0.00, 0.00, 0.00, 1.21, 98.79, 0.00, 0.00, 0.00),
        (4, 2): (0.75, 0.00, 1.54, 97.72, 0.00),
        (1, 3): (25.92, 0.00, 65.85, 1.91, 1.16, 5.17),
        (4, 3): (0.00, 0.00, 0.00, 98.14, 0.00, 1.86),
    },
}

BSUE_TABLE = {
    50: {
        (1, 2): (9.93, 10.57, 11.67, 10.86, 31.97, 12.92, 12.08, 0.00),
        (4, 2): (4.04, 2.23, 1.32, 92.31, 0.10),
        (1, 3): (78.53, 3.70, 5.54, 4.76, 0.00, 7.46),
        (4, 3): (0.12, 0.00, 0.00, 96.44, 0.00, 3.44),
    },
    100: {
        (1, 2): (0.90, 4.48, 9.43, 5.83, 53.65, 14.80, 10.91, 0.00),
        (4, 2): (14.16, 9.14, 6.59, 67.90, 2.21),
        (1, 3): (48.61, 7.85, 13.30, 11.64, 0.00, 18.60),
        (4, 3): (0.62, 0.00, 0.00, 86.55, 1.70, 11.13),
    },
    150: {
        (1, 2): (0.00, 0.00, 4.49, 6.90, 81.17, 2.59, 4.84, 0.00),
        (4, 2): (15.16, 17.38, 8.07, 55.69, 3.70),
        (1, 3): (39.48, 8.74, 20.14, 12.67, 0.00, 18.97),
        (4, 3): (0.35, 0.00, 0.00, 78.76, 5.02, 15.87),
    },
}

# Reported three-route reference values, contingent on the assumed link data.
THREE_ROUTE_TARGETS = {
    "lower_bound_b1": 6.715,
    "upper_bound_b1": 7.715,
    "bsue_threshold": 7.532,
    "route3_time": 8.000,
}

_EUNIT_SOLVER = {"step": "armijo", "max_iterations": 4000, "kkt_tolerance": 1e-6}
_BSUE_SOLVER = {"step": "msa", "max_iterations": 20000, "kkt_tolerance": 1e-4}
_DUE_SOLVER = {"step": "armijo", "max_iterations": 50000, "kkt_tolerance": 1e-6}


@dataclass
class Claim:
    name: str
    kind: str  # exact | statistical | contingent
    passed: bool
    observed: Any = None
    target: Any = None
    tolerance: Any = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "passed": bool(self.passed),
            "observed": self.observed,
            "target": self.target,
            "tolerance": self.tolerance,
            "note": self.note,
        }


@dataclass
class SuiteReport:
    suite: str
    seed: int
    strict_values: bool = False
    claims: list[Claim] = field(default_factory=list)
    tables: dict[str, Any] = field(default_factory=dict)

    def add(self, claim: Claim) -> None:
        self.claims.append(claim)

    @property
    def gating_claims(self) -> list[Claim]:
        if self.strict_values:
            return list(self.claims)
        return [c for c in self.claims if c.kind != "contingent"]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.gating_claims)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "strict_values": self.strict_values,
            "passed": self.passed,
            "claims": [c.to_dict() for c in self.claims],
            "tables": self.tables,
        }

    def summary_lines(self) -> list[str]:
        lines = []
        for c in self.claims:
            status = "PASS" if c.passed else "FAIL"
            extra = "" if c.target is None else f" (observed {c.observed}, target {c.target})"
            lines.append(f"[{status}] {c.kind:<11} {c.name}{extra}")
        lines.append(f"suite {self.suite}: {'PASS' if self.passed else 'FAIL'}")
        return lines


def _close(observed: float, target: float, tol: float) -> bool:
    return abs(observed - target) <= tol


def _workdir(workdir) -> Path:
    if workdir is None:
        return Path(tempfile.mkdtemp(prefix="eunit-sue-"))
    path = Path(workdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --- three-route suite -----------------------------------------------------------


def run_three_route_suite(seed: int = 0, workdir=None, strict_values: bool = False) -> SuiteReport:
    """Replicate the three-route findings: exclusion, DUE limit, objective trend."""
    report = SuiteReport(suite="three-route", seed=seed, strict_values=strict_values)
    base = _workdir(workdir)
    fixture = three_route()

    sol_b1 = run_scenario(fixture.scenario(base / "b1", "eunit", {"b": 1.0}, _EUNIT_SOLVER, seed))
    report.add(
        Claim(
            "eunit_b1_converged",
            "exact",
            sol_b1.converged and sol_b1.kkt_residual <= 1e-6,
            observed=sol_b1.kkt_residual,
            target=0.0,
            tolerance=1e-6,
        )
    )
    f3 = float(sol_b1.flow.route_flows[2])
    report.add(Claim("route3_excluded_at_b1", "exact", f3 == 0.0, observed=f3, target=0.0))
    od = (1, 2)
    lower = sol_b1.bounds.lower[od]
    upper = sol_b1.bounds.upper[od]
    g3 = float(sol_b1.flow.route_times[2])
    for name, observed in (
        ("lower_bound_b1", lower),
        ("upper_bound_b1", upper),
        ("route3_time", g3),
    ):
        target = THREE_ROUTE_TARGETS[name]
        report.add(
            Claim(
                name,
                "contingent",
                _close(observed, target, 0.1),
                observed=round(observed, 4),
                target=target,
                tolerance=0.1,
                note="depends on assumed link parameters",
            )
        )

    sol_bsue = run_scenario(
        fixture.scenario(base / "bsue", "bsue", {"theta": 0.1, "rho": 1.0}, _BSUE_SOLVER, seed)
    )
    fb3 = float(sol_bsue.flow.route_flows[2])
    report.add(Claim("bsue_route3_excluded", "exact", fb3 == 0.0, observed=fb3, target=0.0))
    threshold = sol_bsue.bounds.upper[od]
    report.add(
        Claim(
            "bsue_threshold",
            "contingent",
            _close(threshold, THREE_ROUTE_TARGETS["bsue_threshold"], 0.1),
            observed=round(threshold, 4),
            target=THREE_ROUTE_TARGETS["bsue_threshold"],
            tolerance=0.1,
            note="depends on assumed link parameters",
        )
    )

    sol_b0 = run_scenario(fixture.scenario(base / "b0", "eunit", {"b": 0.0}, _DUE_SOLVER, seed))
    dispatched = sol_b0.model == "due"
    report.add(
        Claim("b0_dispatches_due", "exact", dispatched, observed=sol_b0.model, target="due")
    )
    sol_due = run_scenario(fixture.scenario(base / "due", "due", {}, _DUE_SOLVER, seed))
    dv = np.abs(sol_b0.flow.link_flows - sol_due.flow.link_flows)
    rel = float((dv / np.maximum(1.0, np.abs(sol_due.flow.link_flows))).max())
    report.add(
        Claim("b0_flows_match_due", "exact", rel <= 1e-6, observed=rel, target=0.0, tolerance=1e-6)
    )

    sol_b10 = run_scenario(fixture.scenario(base / "b10", "eunit", {"b": 10.0}, _EUNIT_SOLVER, seed))
    all_used = bool(np.all(sol_b10.flow.route_flows > 0))
    report.add(
        Claim(
            "all_routes_used_at_b10",
            "exact",
            all_used,
            observed=[round(float(x), 4) for x in sol_b10.flow.route_flows],
        )
    )

    grid = [float(b) for b in np.arange(1.0, 10.5, 0.5)]
    zs, z1s, z2s = [], [], []
    for i, b in enumerate(grid):
        sol = run_scenario(fixture.scenario(base / f"sweep_{i:02d}", "eunit", {"b": b}, _EUNIT_SOLVER, seed))
        zs.append(sol.objective)
        z1s.append(sol.z1)
        z2s.append(sol.z2)
    decreasing = all(zs[i + 1] < zs[i] for i in range(len(zs) - 1))
    report.add(
        Claim(
            "objective_decreasing_in_b",
            "exact",
            decreasing,
            observed=[round(z, 3) for z in zs],
            note="objective strictly decreases along the bound-range sweep",
        )
    )
    dominating = all(
        abs(z2s[i + 1] - z2s[i]) > abs(z1s[i + 1] - z1s[i]) for i in range(len(zs) - 1)
    )
    report.add(
        Claim(
            "z2_change_dominates_z1_change",
            "exact",
            dominating,
            note="the logarithm term moves more than the Beckmann term between sweep points",
        )
    )
    report.tables["bound_sweep"] = {
        "b": grid,
        "objective": zs,
        "z1": z1s,
        "z2": z2s,
    }
    # larger bound range -> larger perception variance for the fastest used route
    variances = []
    for i, b in enumerate(grid):
        sol = run_scenario(fixture.scenario(base / f"sweep_{i:02d}", "eunit", {"b": b}, _EUNIT_SOLVER, seed))
        lo, up = sol.bounds.lower[od], sol.bounds.upper[od]
        g = sol.flow.route_times
        used = sol.flow.route_flows > 0
        variances.append(max(eunit_variance(float(t), lo, up) for t in g[used]))
    report.add(
        Claim(
            "variance_increasing_in_b",
            "exact",
            all(variances[i + 1] > variances[i] for i in range(len(variances) - 1)),
            note="max used-route perception variance grows with the bound range",
        )
    )
    return report


# --- Nguyen-Dupuis suite -----------------------------------------------------------


def run_nguyen_dupuis_suite(
    demand_level: float, seed: int = 0, workdir=None, strict_values: bool = False
) -> SuiteReport:
    """Replicate the published probability table structure at one demand level."""
    level = int(demand_level)
    if level not in EUNIT_TABLE:
        raise StructureError(f"demand_level must be one of {sorted(EUNIT_TABLE)}, got {demand_level}")
    report = SuiteReport(suite=f"nguyen-dupuis-{level}", seed=seed, strict_values=strict_values)
    base = _workdir(workdir)
    fixture = nguyen_dupuis(float(level))

    sol_eunit = run_scenario(fixture.scenario(base / "eunit", "eunit", {"b": 10.0}, _EUNIT_SOLVER, seed))
    sol_bsue = run_scenario(
        fixture.scenario(base / "bsue", "bsue", {"theta": 0.1, "rho": 10.0}, _BSUE_SOLVER, seed)
    )
    report.add(
        Claim(
            "eunit_converged",
            "exact",
            sol_eunit.converged and sol_eunit.kkt_residual <= 1e-6,
            observed=sol_eunit.kkt_residual,
            tolerance=1e-6,
        )
    )

    rs = sol_eunit.route_set
    ours_eunit: dict[str, list[float]] = {}
    ours_bsue: dict[str, list[float]] = {}
    for od, paper_row in EUNIT_TABLE[level].items():
        sl = rs.slice_for(od)
        mine = [100.0 * float(p) for p in sol_eunit.probabilities[sl]]
        mine_bsue = [100.0 * float(p) for p in sol_bsue.probabilities[sl]]
        key = f"{od[0]}-{od[1]}"
        ours_eunit[key] = [round(x, 2) for x in mine]
        ours_bsue[key] = [round(x, 2) for x in mine_bsue]
        if len(paper_row) != len(mine):
            raise StructureError(f"OD {od}: fixture has {len(mine)} routes, table has {len(paper_row)}")

        # published rows must themselves sum to 100% up to rounding
        row_sum = sum(paper_row)
        report.add(
            Claim(
                f"paper_row_sums_to_100_od_{key}",
                "exact",
                abs(row_sum - 100.0) <= 0.02,
                observed=round(row_sum, 2),
                target=100.0,
                tolerance=0.02,
            )
        )
        # structural: dominant route matches
        dom_ok = int(np.argmax(mine)) == int(np.argmax(paper_row))
        report.add(
            Claim(
                f"dominant_route_od_{key}",
                "exact",
                dom_ok,
                observed=int(np.argmax(mine)) + 1,
                target=int(np.argmax(paper_row)) + 1,
            )
        )
        # structural: exact zeros wherever the table shows 0.00 with positive BSUE
        bsue_row = BSUE_TABLE[level][od]
        must_zero = [
            j for j, (pe, pb) in enumerate(zip(paper_row, bsue_row)) if pe == 0.0 and pb > 0.0
        ]
        zeros_ok = all(mine[j] == 0.0 for j in must_zero)
        report.add(
            Claim(
                f"eunit_zero_pattern_od_{key}",
                "exact",
                zeros_ok,
                observed=[round(mine[j], 4) for j in must_zero],
                target=[0.0] * len(must_zero),
                note="routes dropped by the bounded perception but kept by the bounded-choice baseline",
            )
        )
        # contingent: per-route percentages within 5 points
        dev = max(abs(m - p) for m, p in zip(mine, paper_row))
        report.add(
            Claim(
                f"eunit_values_od_{key}",
                "contingent",
                dev <= 5.0,
                observed=round(dev, 2),
                target=0.0,
                tolerance=5.0,
                note="max percentage-point deviation from the published row",
            )
        )
        dev_b = max(abs(m - p) for m, p in zip(mine_bsue, bsue_row))
        report.add(
            Claim(
                f"bsue_values_od_{key}",
                "contingent",
                dev_b <= 5.0,
                observed=round(dev_b, 2),
                target=0.0,
                tolerance=5.0,
                note="max percentage-point deviation from the published row",
            )
        )
    report.tables["eunit_percent"] = ours_eunit
    report.tables["bsue_percent"] = ours_bsue
    report.tables["bounds"] = {
        f"{od[0]}-{od[1]}": {
            "eunit_lower": round(sol_eunit.bounds.lower[od], 4),
            "eunit_upper": round(sol_eunit.bounds.upper[od], 4),
            "bsue_threshold": round(sol_bsue.bounds.upper[od], 4),
        }
        for od in EUNIT_TABLE[level]
    }
    return report


# --- oracle batteries ------------------------------------------------------------


def _erum_battery(report: SuiteReport, rng: np.random.Generator, n_instances: int, n_samples: int) -> None:
    failures = 0
    worst = 0.0
    for i in range(n_instances):
        k = int(rng.integers(2, 7))
        lower = float(rng.uniform(0.0, 5.0))
        upper = lower + float(rng.uniform(1.0, 10.0))
        g = rng.uniform(lower + 1e-3, upper - 1e-3, size=k)
        probs = eunit_prob(g, lower, upper).probs
        weights = (upper - g) / (g - lower)
        freq = erum_choice_frequencies(weights, n_samples, seed=int(rng.integers(0, 2**31))).probs
        se = np.sqrt(probs * (1.0 - probs) / n_samples)
        dev = np.abs(freq - probs) / np.maximum(se, 1e-15)
        worst = max(worst, float(dev.max()))
        if np.any(np.abs(freq - probs) > 3.0 * se):
            failures += 1
    report.add(
        Claim(
            "erum_matches_closed_form",
            "statistical",
            failures == 0,
            observed={"instances": n_instances, "failures": failures, "worst_dev_se": round(worst, 2)},
            target=0,
            tolerance="3 binomial standard errors per route",
        )
    )


def run_oracle_suites(seed: int = 0, fast: bool = False) -> SuiteReport:
    """Execute the independent-oracle batteries and report pass/fail per battery."""
    report = SuiteReport(suite="oracles", seed=seed)
    rng = np.random.default_rng(seed)

    # Monte-Carlo ERUM versus the closed form
    _erum_battery(report, rng, n_instances=20 if fast else 200, n_samples=10**6)

    # frozen sanity case: weights (3, 1)
    freq = erum_choice_frequencies([3.0, 1.0], 10**6, seed=seed).probs
    se = math.sqrt(0.75 * 0.25 / 10**6)
    report.add(
        Claim(
            "erum_weights_3_1",
            "statistical",
            abs(freq[0] - 0.75) <= 3 * se,
            observed=round(float(freq[0]), 5),
            target=0.75,
            tolerance=round(3 * se, 6),
        )
    )

    # inner bound: analytic quadratic and bisection versus the production solver
    lower = solve_inner_lower_bound([5.0, 6.0], 4.0, 1.0)
    analytic = (25.0 - math.sqrt(73.0)) / 6.0
    report.add(
        Claim(
            "inner_bound_quadratic_case",
            "exact",
            abs(lower - analytic) <= 1e-10,
            observed=lower,
            target=analytic,
            tolerance=1e-10,
        )
    )
    worst = 0.0
    n_cases = 10 if fast else 100
    for _ in range(n_cases):
        g = np.sort(rng.uniform(1.0, 30.0, size=int(rng.integers(1, 7))))
        b = float(rng.uniform(0.5, 10.0))
        q = float(rng.uniform(0.1, 200.0))
        got = solve_inner_lower_bound(g, b, q)
        ref = oracles.bisection_lower_bound(g, b, q)
        worst = max(worst, abs(got - ref))
    report.add(
        Claim(
            "inner_bound_matches_bisection",
            "exact",
            worst <= 1e-9,
            observed=worst,
            tolerance=1e-9,
            note=f"{n_cases} randomized instances",
        )
    )

    # finite-difference gradient check on random states
    fixture = braess_bridge()
    with tempfile.TemporaryDirectory(prefix="eunit-sue-") as tmp:
        scenario = fixture.scenario(Path(tmp), "eunit", {"b": 2.0}, seed=seed)
    spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 2.0)
    worst_rel = 0.0
    for _ in range(10 if fast else 100):
        f = rng.uniform(0.0, 40.0, size=scenario.route_set.n_routes)
        state = load_flows(scenario.network, scenario.route_set, f)
        grad = eunit_gradient(state, spec)
        fd = oracles.central_difference_gradient(
            lambda x: eunit_objective(load_flows(scenario.network, scenario.route_set, x), spec)[0],
            f,
        )
        rel = float(np.max(np.abs(grad - fd) / np.maximum(1.0, np.abs(fd))))
        worst_rel = max(worst_rel, rel)
    report.add(
        Claim(
            "gradient_matches_finite_differences",
            "exact",
            worst_rel <= 1e-6,
            observed=worst_rel,
            tolerance=1e-6,
        )
    )

    # dense minimisation oracle versus the fixed-point solver
    worst_flow = _dense_oracle_battery(rng, n_instances=4 if fast else 20)
    report.add(
        Claim(
            "solver_matches_dense_oracle",
            "exact",
            worst_flow <= 1e-6,
            observed=worst_flow,
            tolerance=1e-6,
            note="route-flow deviation, constant or linear cost instances",
        )
    )

    # uniqueness: random starts agree
    worst_dev = _uniqueness_battery(seed, n_starts=3 if fast else 10)
    report.add(
        Claim(
            "uniqueness_across_starts",
            "exact",
            worst_dev <= 1e-5,
            observed=worst_dev,
            tolerance=1e-5,
            note="max pairwise relative route-flow deviation",
        )
    )

    # closed-form integral versus adaptive quadrature
    worst_q = 0.0
    for _ in range(5 if fast else 25):
        t0 = float(rng.uniform(0.5, 20.0))
        cap = float(rng.uniform(10.0, 1000.0))
        al = float(rng.uniform(0.0, 1.0))
        be = float(rng.uniform(1.0, 6.0))
        v = float(rng.uniform(0.0, 2.0 * cap))
        closed = t0 * v * (1.0 + al / (be + 1.0) * (v / cap) ** be)
        ref = oracles.quadrature_link_integral(t0, cap, al, be, v)
        worst_q = max(worst_q, abs(closed - ref) / max(1.0, abs(ref)))
    report.add(
        Claim(
            "link_integral_matches_quadrature",
            "exact",
            worst_q <= 1e-9,
            observed=worst_q,
            tolerance=1e-9,
        )
    )

    # distributional link: -ln U is exponential
    u = np.random.default_rng(seed).random(20000)
    ks = stats.kstest(-np.log(u), "expon")
    report.add(
        Claim(
            "log_uniform_is_exponential",
            "statistical",
            ks.pvalue > 0.01,
            observed=round(float(ks.pvalue), 5),
            tolerance="KS test at significance 0.01",
        )
    )

    # variance identity against the distribution moments
    worst_rel = 0.0
    for _ in range(200):
        lo = float(rng.uniform(0.0, 10.0))
        up = lo + float(rng.uniform(0.5, 20.0))
        g = float(rng.uniform(lo + 1e-6 * (up - lo), up - 1e-6 * (up - lo)))
        direct = eunit_variance(g, lo, up)
        _, via_moments = exp_uniform_moments(ExpUniform(lo, up, (g - lo) / (up - g)))
        worst_rel = max(worst_rel, abs(direct - via_moments) / max(abs(via_moments), 1e-300))
    report.add(
        Claim(
            "variance_identity",
            "exact",
            worst_rel <= 1e-12,
            observed=worst_rel,
            tolerance=1e-12,
        )
    )
    return report


def _random_parallel_instance(rng: np.random.Generator, linear: bool):
    """Small parallel-link network with constant or linear costs."""
    n_routes = int(rng.integers(2, 4))
    links = []
    routes = {}
    from .network import Link

    for i in range(n_routes):
        alpha = 0.0 if not linear else float(rng.uniform(0.1, 2.0))
        links.append(
            Link(
                id=i + 1,
                tail=1,
                head=2,
                fftt=float(rng.uniform(2.0, 10.0)),
                capacity=float(rng.uniform(20.0, 120.0)),
                alpha=alpha,
                beta=1.0,
            )
        )
    network = Network(links)
    routes[(1, 2)] = [Route(1, 2, (lk.id,)) for lk in links]
    route_set = RouteSet(network, routes)
    demand = ODPair(1, 2, float(rng.uniform(1.0, 80.0)))
    return network, route_set, demand


def _dense_oracle_battery(rng: np.random.Generator, n_instances: int) -> float:
    worst = 0.0
    for i in range(n_instances):
        network, route_set, demand = _random_parallel_instance(rng, linear=bool(i % 2))
        b = float(rng.uniform(0.3, 6.0))
        spec = EUnitSueSpec(
            network,
            route_set,
            [demand],
            b,
            # 1e-6 flow agreement needs a certificate far below the default
            SolverOptions(step_rule="armijo", max_iterations=8000, kkt_tolerance=1e-11),
        )
        sol = solve_eunit_sue(spec)
        inc = route_set.incidence().toarray()
        ref = oracles.dense_route_flow_oracle(
            [lk.fftt for lk in network.links],
            [lk.capacity for lk in network.links],
            [lk.alpha for lk in network.links],
            [lk.beta for lk in network.links],
            inc,
            [0] * route_set.n_routes,
            [demand.demand],
            [b],
        )
        worst = max(worst, float(np.max(np.abs(sol.flow.route_flows - ref))))
    return worst


def _uniqueness_battery(seed: int, n_starts: int) -> float:
    with tempfile.TemporaryDirectory(prefix="eunit-sue-") as tmp:
        scenario = three_route().scenario(Path(tmp), "eunit", {"b": 1.0}, _EUNIT_SOLVER, seed)
    worst = 0.0
    flows = []
    for s in range(n_starts):
        spec = EUnitSueSpec(
            scenario.network,
            scenario.route_set,
            scenario.demands,
            1.0,
            SolverOptions(step_rule="armijo", max_iterations=4000, init="random", seed=seed + s),
        )
        sol = solve_eunit_sue(spec)
        flows.append(sol.flow.route_flows)
    scale = max(float(np.max(np.abs(f))) for f in flows)
    for i in range(len(flows)):
        for j in range(i + 1, len(flows)):
            worst = max(worst, float(np.max(np.abs(flows[i] - flows[j]))) / scale)
    return worst
