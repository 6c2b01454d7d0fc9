"""Traffic assignment with a bounded perceived travel time.

The package solves the stochastic user equilibrium whose route choice follows
the eUnit model (probabilities proportional to ``(u - g)/(g - l)`` inside
endogenous per-OD bounds) via its equivalent convex program, alongside the
deterministic (DUE), logit (MNL-SUE) and bounded-choice (BSUE) baselines, with
a Monte-Carlo random-utility oracle validating every closed form.
"""

from ._backend import KERNEL_BACKEND, available_backends
from .choice import (
    BCParams,
    EUnitBoundRange,
    EUnitParams,
    ExpUniform,
    MNLParams,
    MNWParams,
    ProbVector,
    bc_prob,
    erum_choice_counts,
    erum_choice_frequencies,
    erum_sample_choice,
    eunit_prob,
    eunit_prob_from_utilities,
    eunit_variance,
    exp_uniform_cdf,
    exp_uniform_moments,
    exp_uniform_quantile,
    mnl_prob,
    mnw_prob,
    mnw_variance,
    sensitivity,
)
from .equilibrium import (
    BoundState,
    EquilibriumSolution,
    EUnitSueSpec,
    SolverOptions,
    eunit_gradient,
    eunit_objective,
    eunit_route_flows_from_bound,
    kkt_residual,
    solve_bsue_fixed_point,
    solve_due,
    solve_eunit_sue,
    solve_inner_lower_bound,
    solve_mnl_sue,
)
from .errors import (
    DomainError,
    EmptySupportError,
    EUnitSueError,
    ScenarioError,
    SolverError,
    StructureError,
)
from .network import (
    FlowState,
    Link,
    Network,
    ODPair,
    Route,
    RouteEnumeration,
    RouteSet,
    beckmann_link_integral,
    bpr_time,
    build_route_set,
    enumerate_routes,
    load_flows,
)
from .scenario import (
    ResultBundle,
    Scenario,
    load_scenario,
    read_demand_csv,
    read_links_csv,
    read_routes_csv,
    run_scenario,
    solve_and_write,
    write_results,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
