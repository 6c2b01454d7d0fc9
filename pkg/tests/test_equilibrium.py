"""Equilibrium solvers: objective/gradient, KKT machinery, baselines, oracles."""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

from eunit_sue.equilibrium import (
    BoundState,
    EUnitSueSpec,
    SolverOptions,
    eunit_gradient,
    eunit_objective,
    kkt_residual,
    solve_bsue_fixed_point,
    solve_due,
    solve_eunit_sue,
    solve_inner_lower_bound,
    solve_mnl_sue,
)
from eunit_sue.errors import DomainError
from eunit_sue.fixtures import braess_bridge, three_route
from eunit_sue.network import Link, Network, ODPair, Route, RouteSet, load_flows
from eunit_sue.oracles import central_difference_gradient, dense_route_flow_oracle

ANALYTIC_LOWER = (25.0 - math.sqrt(73.0)) / 6.0
ANALYTIC_FLOWS = (0.77200187265876558394, 0.22799812734123441606)

ARMIJO = SolverOptions(step_rule="armijo", max_iterations=4000)


def constant_route_network(times):
    links = [
        Link(i + 1, 1, 2, fftt=t, capacity=100.0, alpha=0.0, beta=1.0)
        for i, t in enumerate(times)
    ]
    net = Network(links)
    rs = RouteSet(net, {(1, 2): [Route(1, 2, (lk.id,)) for lk in links]})
    return net, rs


def braess_problem():
    with tempfile.TemporaryDirectory() as tmp:
        scenario = braess_bridge().scenario(Path(tmp), "due", {})
    return scenario.network, scenario.route_set, scenario.demands


class TestObjective:
    def test_zero_flows(self):
        net, rs = constant_route_network([2.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 1.0)
        state = load_flows(net, rs, [0.0])
        assert eunit_objective(state, spec) == (0.0, 0.0, 0.0)

    def test_single_link_decomposition(self):
        net, rs = constant_route_network([2.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 1.0)
        state = load_flows(net, rs, [3.0])
        z, z1, z2 = eunit_objective(state, spec)
        assert z1 == pytest.approx(6.0, abs=1e-12)
        assert z2 == pytest.approx(-math.log(4.0), abs=1e-12)
        assert z == pytest.approx(6.0 - math.log(4.0), abs=1e-12)

    def test_separable_over_ods(self):
        links = [
            Link(1, 1, 2, 2.0, 100.0, 0.0, 1.0),
            Link(2, 3, 4, 5.0, 100.0, 0.0, 1.0),
        ]
        net = Network(links)
        rs = RouteSet(net, {(1, 2): [Route(1, 2, (1,))], (3, 4): [Route(3, 4, (2,))]})
        demands = [ODPair(1, 2, 2.0), ODPair(3, 4, 4.0)]
        spec = EUnitSueSpec(net, rs, demands, 1.5)
        both = eunit_objective(load_flows(net, rs, [2.0, 4.0]), spec)[0]

        rs_a = RouteSet(net, {(1, 2): [Route(1, 2, (1,))]})
        spec_a = EUnitSueSpec(net, rs_a, [ODPair(1, 2, 2.0)], 1.5)
        only_a = eunit_objective(load_flows(net, rs_a, [2.0]), spec_a)[0]
        rs_b = RouteSet(net, {(3, 4): [Route(3, 4, (2,))]})
        spec_b = EUnitSueSpec(net, rs_b, [ODPair(3, 4, 4.0)], 1.5)
        only_b = eunit_objective(load_flows(net, rs_b, [4.0]), spec_b)[0]
        assert both == pytest.approx(only_a + only_b, abs=1e-12)

    def test_negative_flow_rejected(self):
        net, rs = constant_route_network([2.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 1.0)
        with pytest.raises(DomainError):
            load_flows(net, rs, [-1.0])


class TestGradient:
    def test_constant_link_at_zero_flow(self):
        net, rs = constant_route_network([2.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 1.0)
        state = load_flows(net, rs, [0.0])
        assert eunit_gradient(state, spec)[0] == pytest.approx(1.0, abs=1e-12)

    def test_vanishing_penalty_at_large_flow(self):
        net, rs = constant_route_network([2.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 1.0)
        state = load_flows(net, rs, [1e9])
        assert eunit_gradient(state, spec)[0] == pytest.approx(2.0, abs=1e-8)

    def test_finite_difference_battery(self):
        net, route_set, demands = braess_problem()
        spec = EUnitSueSpec(net, route_set, demands, 2.0)
        rng = np.random.default_rng(5)
        worst = 0.0
        for _ in range(100):
            f = rng.uniform(0.0, 40.0, route_set.n_routes)
            state = load_flows(net, route_set, f)
            grad = eunit_gradient(state, spec)
            fd = central_difference_gradient(
                lambda x: eunit_objective(load_flows(net, route_set, x), spec)[0], f
            )
            worst = max(worst, float(np.max(np.abs(grad - fd) / np.maximum(1.0, np.abs(fd)))))
        assert worst <= 1e-6

    def test_z2_hessian_diagonal(self):
        # second derivative of -b*ln(f+1) is b/(f+1)^2 > 0
        net, rs = constant_route_network([2.0, 3.0])
        b = 1.7
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], b)

        def grad_r(f0):
            state = load_flows(net, rs, [f0, 1.0])
            return eunit_gradient(state, spec)[0]

        for f0 in (0.0, 0.5, 4.0):
            h = 1e-5
            fd2 = (grad_r(f0 + h) - grad_r(max(f0 - h, 0.0))) / (h if f0 == 0.0 else 2 * h)
            assert fd2 == pytest.approx(b / (f0 + 1.0) ** 2, rel=1e-4)

    def test_midpoint_convexity_on_segments(self):
        net, route_set, demands = braess_problem()
        spec = EUnitSueSpec(net, route_set, demands, 2.0)
        rng = np.random.default_rng(8)
        q = demands[0].demand
        for _ in range(25):
            a = rng.dirichlet(np.ones(3)) * q
            b = rng.dirichlet(np.ones(3)) * q
            za = eunit_objective(load_flows(net, route_set, a), spec)[0]
            zb = eunit_objective(load_flows(net, route_set, b), spec)[0]
            zm = eunit_objective(load_flows(net, route_set, (a + b) / 2), spec)[0]
            assert zm <= (za + zb) / 2 + 1e-9


class TestKktResidual:
    def _solved_two_route(self):
        net, rs = constant_route_network([5.0, 6.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 1.0)], 4.0)
        flows = np.array(ANALYTIC_FLOWS)
        state = load_flows(net, rs, flows)
        bounds = BoundState("eunit", {(1, 2): ANALYTIC_LOWER}, {(1, 2): 4.0})
        return spec, state, bounds

    def test_exact_solution_residual_tiny(self):
        spec, state, bounds = self._solved_two_route()
        assert kkt_residual(state, bounds, spec) <= 1e-10

    def test_perturbation_increases_residual(self):
        spec, state, bounds = self._solved_two_route()
        base = kkt_residual(state, bounds, spec)
        perturbed = load_flows(
            spec.network, spec.route_set, np.array(ANALYTIC_FLOWS) + [0.1, -0.1]
        )
        assert kkt_residual(perturbed, bounds, spec) > base

    def test_unused_route_beyond_upper_contributes_zero(self):
        net, rs = constant_route_network([5.0, 20.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 3.0)], 2.0)
        lower = solve_inner_lower_bound([5.0], 2.0, 3.0)
        state = load_flows(net, rs, [3.0, 0.0])
        bounds = BoundState("eunit", {(1, 2): lower}, {(1, 2): 2.0})
        assert kkt_residual(state, bounds, spec) <= 1e-12


class TestEUnitSolver:
    def test_two_route_constant_analytic(self):
        net, rs = constant_route_network([5.0, 6.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 1.0)], 4.0)
        sol = solve_eunit_sue(spec)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(ANALYTIC_FLOWS[0], abs=1e-6)
        assert sol.flow.route_flows[1] == pytest.approx(ANALYTIC_FLOWS[1], abs=1e-6)
        assert sol.bounds.lower[(1, 2)] == pytest.approx(ANALYTIC_LOWER, abs=1e-6)
        assert sol.bounds.upper[(1, 2)] == pytest.approx(ANALYTIC_LOWER + 4.0, abs=1e-6)

    def test_identical_congestible_links_split_evenly(self, two_identical_bpr_links):
        net, rs = two_identical_bpr_links
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 30.0)], 2.0, ARMIJO)
        sol = solve_eunit_sue(spec)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(15.0, abs=1e-6)
        assert sol.flow.route_flows[1] == pytest.approx(15.0, abs=1e-6)

    def test_msa_step_rule_converges(self):
        net, rs = constant_route_network([5.0, 6.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 1.0)], 4.0, SolverOptions(step_rule="msa"))
        sol = solve_eunit_sue(spec)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(ANALYTIC_FLOWS[0], abs=1e-6)

    def test_b_zero_dispatches_to_due(self):
        net, rs = constant_route_network([5.0, 6.0])
        spec = EUnitSueSpec(net, rs, [ODPair(1, 2, 1.0)], 0.0)
        sol = solve_eunit_sue(spec)
        assert sol.model == "due"
        assert any("deterministic user equilibrium" in n for n in sol.notes)
        assert sol.flow.route_flows[0] == pytest.approx(1.0, abs=1e-9)

    def test_due_limit_small_b(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        due = solve_due(scenario.network, scenario.route_set, scenario.demands, ARMIJO)
        spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 1e-3, ARMIJO)
        sue = solve_eunit_sue(spec)
        assert sue.converged
        rel = np.max(
            np.abs(sue.flow.link_flows - due.flow.link_flows)
            / np.maximum(1.0, np.abs(due.flow.link_flows))
        )
        assert rel <= 1e-2

    def test_mixed_zero_positive_bounds_rejected(self):
        links = [
            Link(1, 1, 2, 2.0, 100.0, 0.0, 1.0),
            Link(2, 3, 4, 5.0, 100.0, 0.0, 1.0),
        ]
        net = Network(links)
        rs = RouteSet(net, {(1, 2): [Route(1, 2, (1,))], (3, 4): [Route(3, 4, (2,))]})
        demands = [ODPair(1, 2, 2.0), ODPair(3, 4, 4.0)]
        with pytest.raises(DomainError):
            EUnitSueSpec(net, rs, demands, {(1, 2): 0.0, (3, 4): 1.0})

    def test_probabilities_match_closed_form_at_convergence(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 1.0, ARMIJO)
        sol = solve_eunit_sue(spec)
        assert sol.converged
        from eunit_sue.choice import eunit_prob

        od = (1, 2)
        sl = scenario.route_set.slice_for(od)
        closed = eunit_prob(
            sol.flow.route_times[sl], sol.bounds.lower[od], sol.bounds.upper[od]
        ).probs
        assert np.allclose(sol.probabilities[sl], closed, atol=1e-5)

    def test_trichotomy_exact(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 1.0, ARMIJO)
        sol = solve_eunit_sue(spec)
        od = (1, 2)
        upper = sol.bounds.upper[od]
        lower = sol.bounds.lower[od]
        for f, g in zip(sol.flow.route_flows, sol.flow.route_times):
            if f > 0:
                assert lower < g < upper
            else:
                assert g >= upper

    def test_armijo_objective_nonincreasing(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 1.0, ARMIJO)
        sol = solve_eunit_sue(spec)
        objectives = [z for (_, z, _) in sol.trace]
        assert all(b <= a + 1e-9 for a, b in zip(objectives, objectives[1:]))

    def test_uniqueness_across_starts(self):
        net, rs = constant_route_network([5.0, 6.0, 7.0])
        flows = []
        for s in range(10):
            spec = EUnitSueSpec(
                net,
                rs,
                [ODPair(1, 2, 5.0)],
                3.0,
                SolverOptions(step_rule="armijo", max_iterations=4000, init="random", seed=s),
            )
            sol = solve_eunit_sue(spec)
            assert sol.converged
            flows.append(sol.flow.route_flows)
        scale = max(np.max(np.abs(f)) for f in flows)
        for i in range(len(flows)):
            for j in range(i + 1, len(flows)):
                assert np.max(np.abs(flows[i] - flows[j])) / scale <= 1e-5

    def test_feasibility_all_iterates(self):
        # conservation is maintained to near machine precision at the solution
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        spec = EUnitSueSpec(scenario.network, scenario.route_set, scenario.demands, 2.0, ARMIJO)
        sol = solve_eunit_sue(spec)
        assert sol.flow.route_flows.sum() == pytest.approx(100.0, rel=1e-9)


class TestDenseOracleEquivalence:
    def test_randomized_instances(self):
        # 1e-6 agreement on flows needs a much tighter KKT certificate
        tight = SolverOptions(step_rule="armijo", max_iterations=8000, kkt_tolerance=1e-11)
        rng = np.random.default_rng(21)
        for i in range(20):
            n = int(rng.integers(2, 4))
            linear = bool(i % 2)
            links = [
                Link(
                    j + 1,
                    1,
                    2,
                    fftt=float(rng.uniform(2.0, 10.0)),
                    capacity=float(rng.uniform(20.0, 120.0)),
                    alpha=float(rng.uniform(0.1, 2.0)) if linear else 0.0,
                    beta=1.0,
                )
                for j in range(n)
            ]
            net = Network(links)
            rs = RouteSet(net, {(1, 2): [Route(1, 2, (lk.id,)) for lk in links]})
            q = float(rng.uniform(1.0, 80.0))
            b = float(rng.uniform(0.3, 6.0))
            spec = EUnitSueSpec(net, rs, [ODPair(1, 2, q)], b, tight)
            sol = solve_eunit_sue(spec)
            assert sol.converged
            ref = dense_route_flow_oracle(
                [lk.fftt for lk in links],
                [lk.capacity for lk in links],
                [lk.alpha for lk in links],
                [lk.beta for lk in links],
                rs.incidence().toarray(),
                [0] * n,
                [q],
                [b],
            )
            assert np.max(np.abs(sol.flow.route_flows - ref)) <= 1e-6


class TestDue:
    def test_constant_times_all_or_nothing(self):
        net, rs = constant_route_network([5.0, 6.0])
        sol = solve_due(net, rs, [ODPair(1, 2, 7.0)])
        assert sol.converged
        assert sol.flow.route_flows[0] == 7.0
        assert sol.flow.route_flows[1] == 0.0

    def test_tie_breaks_to_lowest_index(self):
        net, rs = constant_route_network([5.0, 5.0])
        sol = solve_due(net, rs, [ODPair(1, 2, 7.0)])
        assert sol.flow.route_flows[0] == 7.0

    def test_identical_links_split_evenly(self, two_identical_bpr_links):
        net, rs = two_identical_bpr_links
        sol = solve_due(net, rs, [ODPair(1, 2, 30.0)], ARMIJO)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(15.0, abs=1e-4)

    def test_braess_matches_dense_oracle(self):
        # a 1e-9 gap certificate keeps the flow error safely under 1e-5
        net, route_set, demands = braess_problem()
        sol = solve_due(
            net, route_set, demands,
            SolverOptions(step_rule="armijo", max_iterations=50000, kkt_tolerance=1e-9),
        )
        assert sol.converged
        assert sol.kkt_residual <= 1e-6
        ref = dense_route_flow_oracle(
            [lk.fftt for lk in net.links],
            [lk.capacity for lk in net.links],
            [lk.alpha for lk in net.links],
            [lk.beta for lk in net.links],
            route_set.incidence().toarray(),
            [0] * route_set.n_routes,
            [demands[0].demand],
            [0.0],
        )
        assert np.max(np.abs(sol.flow.route_flows - ref)) <= 1e-5


class TestMnlSue:
    def test_constant_costs_single_evaluation(self):
        net, rs = constant_route_network([1.0, 2.0])
        sol = solve_mnl_sue(net, rs, [ODPair(1, 2, 1.0)], dispersion=1.0)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(0.73105857863000487925, abs=1e-9)

    def test_identical_routes_equal_split(self, two_identical_bpr_links):
        net, rs = two_identical_bpr_links
        sol = solve_mnl_sue(net, rs, [ODPair(1, 2, 30.0)], dispersion=0.5)
        assert sol.flow.route_flows[0] == pytest.approx(15.0, abs=1e-6)

    def test_all_flows_strictly_positive(self):
        with tempfile.TemporaryDirectory() as tmp:
            scenario = three_route().scenario(Path(tmp), "due", {})
        sol = solve_mnl_sue(
            scenario.network,
            scenario.route_set,
            scenario.demands,
            dispersion=0.5,
            options=SolverOptions(max_iterations=3000, kkt_tolerance=1e-4),
        )
        assert np.all(sol.flow.route_flows > 0)


class TestBsue:
    def test_constant_costs_single_evaluation(self):
        net, rs = constant_route_network([10.0, 12.0])
        sol = solve_bsue_fixed_point(net, rs, [ODPair(1, 2, 1.0)], scale=1.0, threshold=5.0)
        assert sol.converged
        assert sol.flow.route_flows[0] == pytest.approx(0.88537125287615260592, abs=1e-9)
        assert sol.flow.route_flows[1] == pytest.approx(0.11462874712384739408, abs=1e-9)

    def test_symmetric_split(self, two_identical_bpr_links):
        net, rs = two_identical_bpr_links
        sol = solve_bsue_fixed_point(net, rs, [ODPair(1, 2, 30.0)], scale=0.5, threshold=4.0)
        assert sol.flow.route_flows[0] == pytest.approx(15.0, abs=1e-6)

    def test_beyond_threshold_exactly_zero(self):
        net, rs = constant_route_network([10.0, 16.0])
        sol = solve_bsue_fixed_point(net, rs, [ODPair(1, 2, 5.0)], scale=1.0, threshold=5.0)
        assert sol.flow.route_flows[1] == 0.0
        assert sol.flow.route_flows[0] == 5.0
        assert sol.bounds.kind == "threshold"
        assert sol.bounds.upper[(1, 2)] == pytest.approx(15.0, abs=1e-9)
