"""Equilibrium solvers: the bounded-perception convex program and baselines.

The primary solver minimises

    Z = Z1 + Z2 = sum_a integral_0^{v_a} t_a  -  sum_ij sum_r b_ij * ln(f_r + 1)

over nonnegative route flows meeting the OD demands.  Its KKT system pins the
per-OD lower bound ``l`` (the dual of flow conservation) through the demand
identity ``q = sum_r (l + b - g_r)_+ / (g_r - l)``, which an inner bracketed
root-finder solves each iteration.  Baselines: deterministic user equilibrium
(DUE), logit-based SUE, and the bounded-choice fixed point (BSUE).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .choice import bc_prob, mnl_prob
from .errors import DomainError, SolverError, StructureError
from .network import OD, FlowState, Network, ODPair, RouteSet, load_flows

_STEP_RULES = ("msa", "armijo")
_INIT_MODES = ("uniform", "random")
_ARMIJO_DECREASE = 1e-4
_ARMIJO_MIN_STEP = 2.0**-40


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 5000
    flow_tolerance: float = 1e-12
    kkt_tolerance: float = 1e-6
    inner_tolerance: float = 1e-12
    step_rule: str = "msa"
    init: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise DomainError(f"max_iterations must be >= 1, got {self.max_iterations}")
        for name in ("flow_tolerance", "kkt_tolerance", "inner_tolerance"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.step_rule not in _STEP_RULES:
            raise DomainError(f"step_rule must be one of {_STEP_RULES}, got {self.step_rule!r}")
        if self.init not in _INIT_MODES:
            raise DomainError(f"init must be one of {_INIT_MODES}, got {self.init!r}")


@dataclass(frozen=True)
class BoundState:
    """Per-OD perceived travel time bounds.

    ``kind`` is "eunit" for endogenous (lower, lower + range) bounds and
    "threshold" for the bounded-choice cutoff (min time, min time + range).
    The upper bound is derived, so ``upper == lower + bound_range`` exactly.
    """

    kind: str
    lower: dict[OD, float]
    bound_range: dict[OD, float]

    @property
    def upper(self) -> dict[OD, float]:
        return {od: self.lower[od] + self.bound_range[od] for od in self.lower}


@dataclass
class EquilibriumSolution:
    model: str
    flow: FlowState
    bounds: BoundState | None
    probabilities: np.ndarray
    objective: float
    z1: float
    z2: float
    kkt_residual: float
    iterations: int
    converged: bool
    trace: list[tuple[int, float, float]]
    route_set: RouteSet
    demands: tuple[ODPair, ...]
    notes: tuple[str, ...] = ()


def _normalize_demands(demands: Iterable[ODPair], route_set: RouteSet) -> tuple[ODPair, ...]:
    out = tuple(demands)
    seen: set[OD] = set()
    for d in out:
        if d.od in seen:
            raise StructureError(f"duplicate demand entry for OD {d.od}")
        seen.add(d.od)
        if d.demand > 0 and d.od not in route_set.ods:
            raise StructureError(f"OD {d.od} has demand but no routes")
    return tuple(sorted(out, key=lambda d: d.od))


class EUnitSueSpec:
    """Problem statement for the bounded-perception SUE solve.

    ``bound_range`` is a single number applied to every demanded OD pair or a
    mapping from OD tuple to a number.  Ranges must be positive; an all-zero
    bound range is legal and routes the solve to the DUE solver.
    """

    def __init__(
        self,
        network: Network,
        route_set: RouteSet,
        demands: Iterable[ODPair],
        bound_range: float | Mapping[OD, float],
        options: SolverOptions | None = None,
    ) -> None:
        self.network = network
        self.route_set = route_set
        self.demands = _normalize_demands(demands, route_set)
        self.options = options or SolverOptions()
        demanded = [d.od for d in self.demands if d.demand > 0]
        if isinstance(bound_range, Mapping):
            missing = [od for od in demanded if od not in bound_range]
            if missing:
                raise DomainError(f"bound_range missing for ODs {missing}")
            self._bounds = {od: float(v) for od, v in bound_range.items()}
        else:
            self._bounds = {od: float(bound_range) for od in demanded}
        values = [self._bounds[od] for od in demanded]
        if any(b < 0 for b in values):
            raise DomainError("bound_range must be >= 0")
        if any(b == 0 for b in values) and not all(b == 0 for b in values):
            raise DomainError(
                "mixed zero and positive bound ranges are not supported; "
                "use 0 everywhere (DUE) or positive everywhere"
            )

    def bound_for(self, od: OD) -> float:
        return self._bounds[od]

    @property
    def all_zero_bounds(self) -> bool:
        return bool(self._bounds) and all(b == 0 for b in self._bounds.values())


class _PathProblem:
    """Flat-array view of (network, route set, demands) for the solvers."""

    def __init__(self, network: Network, route_set: RouteSet, demands: Sequence[ODPair]):
        self.network = network
        self.route_set = route_set
        self.demands = tuple(demands)
        self.active = tuple(d for d in self.demands if d.demand > 0)
        if not self.active:
            raise StructureError("no OD pair with positive demand")
        self.slices = {d.od: route_set.slice_for(d.od) for d in self.active}
        self.incidence = route_set.incidence()
        self.total_demand = sum(d.demand for d in self.active)

    def times(self, f: np.ndarray) -> np.ndarray:
        v = self.incidence.T @ f
        return self.incidence @ self.network.link_times(v)

    def state(self, f: np.ndarray) -> FlowState:
        return load_flows(self.network, self.route_set, f)

    def initial_flows(self, options: SolverOptions) -> np.ndarray:
        f = np.zeros(self.route_set.n_routes)
        rng = np.random.default_rng(options.seed) if options.init == "random" else None
        for d in self.active:
            sl = self.slices[d.od]
            n = sl.stop - sl.start
            if rng is None:
                f[sl] = d.demand / n
            else:
                w = rng.gamma(1.0, size=n)
                f[sl] = d.demand * w / w.sum()
        return f

    def probabilities(self, f: np.ndarray) -> np.ndarray:
        p = np.zeros_like(f)
        for d in self.active:
            sl = self.slices[d.od]
            p[sl] = f[sl] / d.demand
        return p

    def beckmann(self, f: np.ndarray) -> float:
        return self.network.beckmann(self.incidence.T @ f)


# --- objective, gradient, inner bound -----------------------------------------


def eunit_objective(flow_state: FlowState, spec: EUnitSueSpec) -> tuple[float, float, float]:
    """Objective value and its (Z1, Z2) decomposition; finite for any f >= 0."""
    f = np.asarray(flow_state.route_flows, dtype=float)
    if np.any(f < 0):
        raise DomainError("negative route flow")
    z1 = spec.network.beckmann(flow_state.link_flows)
    z2 = 0.0
    for d in spec.demands:
        if d.demand <= 0:
            continue
        sl = spec.route_set.slice_for(d.od)
        z2 -= spec.bound_for(d.od) * float(np.log1p(f[sl]).sum())
    return z1 + z2, z1, z2


def eunit_gradient(flow_state: FlowState, spec: EUnitSueSpec) -> np.ndarray:
    """Per-route partials ``g_r - b/(f_r + 1)`` of the objective."""
    f = np.asarray(flow_state.route_flows, dtype=float)
    if np.any(f < 0):
        raise DomainError("negative route flow")
    grad = flow_state.route_times.copy()
    for d in spec.demands:
        if d.demand <= 0:
            continue
        sl = spec.route_set.slice_for(d.od)
        grad[sl] -= spec.bound_for(d.od) / (f[sl] + 1.0)
    return grad


def _demand_at(lower: float, g: np.ndarray, b: float) -> tuple[float, float]:
    """Demand reproduced by a candidate lower bound, and its slope in ``lower``."""
    diff = g - lower
    w = (lower + b - g) / diff
    active = w > 0
    total = float(w[active].sum())
    slope = float(b * np.sum(1.0 / diff[active] ** 2)) if active.any() else 0.0
    return total, slope


def solve_inner_lower_bound(
    route_times,
    bound_range: float,
    demand: float,
    tolerance: float = 1e-12,
    max_iterations: int = 200,
) -> float:
    """Unique lower bound ``l < min g`` with ``sum_r (l + b - g_r)_+/(g_r - l) = q``.

    The demand map is continuous, convex and strictly increasing between
    ``min g - b`` (demand 0) and ``min g`` (demand -> inf), so bisection always
    converges; Newton steps accelerate it inside the bracket.
    """
    g = np.atleast_1d(np.asarray(route_times, dtype=float))
    if g.size == 0 or not np.all(np.isfinite(g)):
        raise DomainError("route times must be a non-empty finite vector")
    if not demand > 0:
        raise DomainError(f"demand must be > 0, got {demand}")
    if not bound_range > 0:
        raise DomainError(f"bound_range must be > 0, got {bound_range}")
    gmin = float(g.min())
    lo = gmin - bound_range
    hi = gmin - 1e-12 * max(1.0, abs(gmin))
    if hi <= lo:
        hi = gmin - (gmin - lo) * 1e-12
    target = tolerance * max(1.0, demand)
    d_hi, _ = _demand_at(hi, g, bound_range)
    if d_hi < demand:
        raise SolverError(
            f"demand {demand} not bracketed: at l={hi} the reproduced demand is {d_hi}"
        )
    x = 0.5 * (lo + hi)
    for _ in range(max_iterations):
        dx, slope = _demand_at(x, g, bound_range)
        if abs(dx - demand) <= target:
            return float(x)
        if dx < demand:
            lo = x
        else:
            hi = x
        if slope > 0:
            x_newton = x - (dx - demand) / slope
            x = x_newton if lo < x_newton < hi else 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(x)):
            return float(x)
    dx, _ = _demand_at(x, g, bound_range)
    if abs(dx - demand) <= 1e3 * target:
        return float(x)
    raise SolverError(
        f"inner bound search did not converge: residual {dx - demand} after "
        f"{max_iterations} iterations (b={bound_range}, q={demand})"
    )


def eunit_route_flows_from_bound(route_times, lower: float, bound_range: float) -> np.ndarray:
    """Route flows ``(l + b - g)_+ / (g - l)``; exactly zero once ``g >= l + b``."""
    g = np.atleast_1d(np.asarray(route_times, dtype=float))
    if not bound_range > 0:
        raise DomainError(f"bound_range must be > 0, got {bound_range}")
    if not lower < g.min():
        raise DomainError(f"lower bound {lower} not below the fastest route {g.min()}")
    return np.clip(lower + bound_range - g, 0.0, None) / (g - lower)


def kkt_residual(flow_state: FlowState, bound_state: BoundState, spec: EUnitSueSpec) -> float:
    """Worst normalised KKT violation over all OD pairs.

    Per OD: the larger of max complementarity ``|f_r*(g_r - b/(f_r+1) - l)|``
    and max stationarity violation ``(l + b/(f_r+1) - g_r)_+`` on zero-flow
    routes, normalised by ``demand * max(g)``.
    """
    worst = 0.0
    f = flow_state.route_flows
    g = flow_state.route_times
    for d in spec.demands:
        if d.demand <= 0:
            continue
        sl = spec.route_set.slice_for(d.od)
        b = spec.bound_for(d.od)
        lower = bound_state.lower[d.od]
        gap = g[sl] - b / (f[sl] + 1.0) - lower
        comp = float(np.abs(f[sl] * gap).max())
        zero = f[sl] == 0.0
        viol = float(np.clip(-gap[zero], 0.0, None).max()) if zero.any() else 0.0
        denom = d.demand * max(float(g[sl].max()), np.finfo(float).tiny)
        worst = max(worst, max(comp, viol) / denom)
    return worst


# --- primary solver -------------------------------------------------------------


def _armijo_step(
    z_fun: Callable[[np.ndarray], float], f: np.ndarray, d: np.ndarray, z0: float, slope: float
) -> tuple[np.ndarray, float]:
    # once the predicted decrease drops below the float resolution of z0 the
    # sufficient-decrease test is all rounding noise; allow those steps so the
    # underlying fixed-point iteration can finish the job
    noise = 4.0 * np.finfo(float).eps * max(1.0, abs(z0))
    alpha = 1.0
    while alpha >= _ARMIJO_MIN_STEP:
        trial = f + alpha * d
        if z_fun(trial) <= z0 + _ARMIJO_DECREASE * alpha * slope + noise:
            return trial, alpha
        alpha *= 0.5
    return f + _ARMIJO_MIN_STEP * d, _ARMIJO_MIN_STEP


class _EUnitLoop:
    """One solve of the bounded-perception program; holds the shared arrays."""

    def __init__(self, spec: EUnitSueSpec):
        self.spec = spec
        self.prob = _PathProblem(spec.network, spec.route_set, spec.demands)
        self.b = {d.od: spec.bound_for(d.od) for d in self.prob.active}
        self.warned_lower = False

    def objective(self, f: np.ndarray) -> float:
        z = self.prob.beckmann(f)
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            z -= self.b[d.od] * float(np.log1p(f[sl]).sum())
        return z

    def lower_bounds(self, g: np.ndarray) -> dict[OD, float]:
        lowers = {}
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            lowers[d.od] = solve_inner_lower_bound(
                g[sl], self.b[d.od], d.demand, tolerance=self.spec.options.inner_tolerance
            )
        if not self.warned_lower and any(v <= 0 for v in lowers.values()):
            warnings.warn(
                "perceived-time lower bound <= 0: the exponentiated-uniform "
                "interpretation needs l > 0, though the program stays well-posed",
                stacklevel=3,
            )
            self.warned_lower = True
        return lowers

    def target(self, g: np.ndarray, lowers: dict[OD, float]) -> np.ndarray:
        target = np.zeros_like(g)
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            flows = eunit_route_flows_from_bound(g[sl], lowers[d.od], self.b[d.od])
            target[sl] = flows * (d.demand / flows.sum())
        return target

    def gradient(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        grad = g.copy()
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            grad[sl] -= self.b[d.od] / (f[sl] + 1.0)
        return grad

    def snap_unused(self, f: np.ndarray, g: np.ndarray, lowers: dict[OD, float]) -> np.ndarray:
        """Zero flows on routes at or beyond the upper bound; rescale per OD."""
        out = f.copy()
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            unused = g[sl] >= lowers[d.od] + self.b[d.od]
            if unused.any():
                kept = out[sl]
                kept[unused] = 0.0
                total = kept.sum()
                if total <= 0:
                    raise SolverError(f"OD {d.od}: all routes at or beyond the upper bound")
                out[sl] = kept * (d.demand / total)
        return out

    def trichotomy_ok(self, f: np.ndarray, g: np.ndarray, lowers: dict[OD, float]) -> bool:
        for d in self.prob.active:
            sl = self.prob.slices[d.od]
            upper = lowers[d.od] + self.b[d.od]
            fs, gs = f[sl], g[sl]
            if np.any((fs == 0.0) & (gs < upper)) or np.any((fs > 0.0) & (gs >= upper)):
                return False
        return True

    def certify(self, f: np.ndarray, g: np.ndarray, lowers: dict[OD, float]):
        """Snap fuzzy zeros, recompute, and measure the candidate's residual."""
        cleaned = self.snap_unused(f, g, lowers)
        state = self.prob.state(cleaned)
        lowers_c = self.lower_bounds(state.route_times)
        bounds = BoundState("eunit", lowers_c, dict(self.b))
        res = kkt_residual(state, bounds, self.spec)
        exact = self.trichotomy_ok(cleaned, state.route_times, lowers_c)
        return cleaned, state, bounds, res, exact

    def newton_polish(self, f: np.ndarray, lowers: dict[OD, float], steps: int = 30) -> np.ndarray:
        """Newton iteration on the active-set KKT system.

        Unknowns are the positive route flows plus one multiplier per OD; the
        averaging loop converges linearly at best, so this finishes the last
        digits once the active set has settled.  Feasibility is preserved
        exactly; any failure returns the input unchanged.
        """
        prob, spec = self.prob, self.spec
        f = f.copy()
        lam = dict(lowers)
        active = f > 0
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return f
        ods = [d for d in prob.active]
        od_row = {d.od: j for j, d in enumerate(ods)}
        route_od = np.empty(f.size, dtype=int)
        for d in ods:
            route_od[prob.slices[d.od]] = od_row[d.od]
        inc = prob.incidence
        try:
            for _ in range(steps):
                v = inc.T @ f
                t = prob.network.link_times(v)
                g = inc @ t
                b_of = np.array([self.b[ods[route_od[i]].od] for i in idx])
                lam_of = np.array([lam[ods[route_od[i]].od] for i in idx])
                resid = g[idx] - b_of / (f[idx] + 1.0) - lam_of
                if np.max(np.abs(resid)) <= 1e-15 * max(1.0, float(np.max(np.abs(g)))):
                    break
                d_inc = inc[idx, :]
                hess = (d_inc.multiply(prob.network.link_time_derivative(v)) @ d_inc.T).toarray()
                hess[np.diag_indices_from(hess)] += b_of / (f[idx] + 1.0) ** 2
                n_a, n_od = idx.size, len(ods)
                cons = np.zeros((n_od, n_a))
                for j, i in enumerate(idx):
                    cons[route_od[i], j] = 1.0
                kkt = np.zeros((n_a + n_od, n_a + n_od))
                kkt[:n_a, :n_a] = hess
                kkt[:n_a, n_a:] = -cons.T
                kkt[n_a:, :n_a] = cons
                rhs = np.concatenate([-resid, np.zeros(n_od)])
                delta = np.linalg.solve(kkt, rhs)
                f[idx] = f[idx] + delta[:n_a]
                for j, d in enumerate(ods):
                    lam[d.od] += delta[n_a + j]
                if np.any(f[idx] < 0):
                    f[idx] = np.clip(f[idx], 0.0, None)
                    for d in ods:
                        sl = prob.slices[d.od]
                        total = f[sl].sum()
                        if total <= 0:
                            return f
                        f[sl] *= d.demand / total
        except np.linalg.LinAlgError:
            return f
        return f


def solve_eunit_sue(spec: EUnitSueSpec) -> EquilibriumSolution:
    """Solve the bounded-perception SUE program.

    Fixed-point iteration with averaging: evaluate route times, solve the
    per-OD inner bound, form target flows from the closed-form route flows and
    step toward them (MSA ``1/k`` or Armijo backtracking on the objective).
    A candidate is accepted once, after snapping fuzzy zeros, its KKT residual
    meets the tolerance and the used/unused split is exact.  A zero bound
    range everywhere dispatches to the DUE solver.
    """
    if spec.all_zero_bounds:
        sol = solve_due(spec.network, spec.route_set, spec.demands, spec.options)
        sol.notes = sol.notes + ("bound range 0: dispatched to deterministic user equilibrium",)
        return sol
    loop = _EUnitLoop(spec)
    options = spec.options
    f = loop.prob.initial_flows(options)
    trace: list[tuple[int, float, float]] = []
    candidate = None  # (cleaned flows, state, bounds, residual, exact trichotomy)
    iterations = 0
    converged = False
    for k in range(1, options.max_iterations + 1):
        iterations = k
        g = loop.prob.times(f)
        lowers = loop.lower_bounds(g)
        target = loop.target(g, lowers)
        direction = target - f
        raw_res = float(np.abs(direction).max()) / max(1.0, loop.prob.total_demand)
        z_now = loop.objective(f)
        trace.append((k, z_now, raw_res))
        if raw_res <= max(10.0 * options.kkt_tolerance, 1e-7) or k == options.max_iterations:
            polished = loop.newton_polish(loop.snap_unused(f, g, lowers), lowers)
            g_p = loop.prob.times(polished)
            candidate = loop.certify(polished, g_p, loop.lower_bounds(g_p))
            trace[-1] = (k, loop.objective(candidate[0]), candidate[3])
            if candidate[3] <= options.kkt_tolerance and candidate[4]:
                converged = True
                break
        if options.step_rule == "armijo":
            slope = float(loop.gradient(f, g) @ direction)
            f, alpha = _armijo_step(loop.objective, f, direction, z_now, slope)
        else:
            alpha = 1.0 / k
            f = f + alpha * direction
        if float(np.abs(alpha * direction).max()) <= options.flow_tolerance * max(
            1.0, loop.prob.total_demand
        ):
            break  # stalled; certified below
    if not converged:
        g = loop.prob.times(f)
        final = loop.certify(f, g, loop.lower_bounds(g))
        if candidate is None or final[3] < candidate[3]:
            candidate = final
        converged = candidate[3] <= options.kkt_tolerance and candidate[4]
    cleaned, state, bounds, res, _ = candidate
    z, z1, z2 = eunit_objective(state, spec)
    return EquilibriumSolution(
        model="eunit",
        flow=state,
        bounds=bounds,
        probabilities=loop.prob.probabilities(cleaned),
        objective=z,
        z1=z1,
        z2=z2,
        kkt_residual=res,
        iterations=iterations,
        converged=converged,
        trace=trace,
        route_set=spec.route_set,
        demands=loop.prob.demands,
    )


# --- deterministic user equilibrium ----------------------------------------------


def _project_simplex(x: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {f >= 0, sum f = total}."""
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, x.size + 1)
    rho = idx[u - css / idx > 0][-1]
    tau = css[rho - 1] / rho
    return np.clip(x - tau, 0.0, None)


def _aon(prob: _PathProblem, g: np.ndarray) -> np.ndarray:
    """All-or-nothing loading; ties break to the lowest route index."""
    f = np.zeros_like(g)
    for d in prob.active:
        sl = prob.slices[d.od]
        f[sl.start + int(np.argmin(g[sl]))] = d.demand
    return f


def _relative_gap(prob: _PathProblem, f: np.ndarray, g: np.ndarray) -> float:
    used = float(f @ g)
    best = sum(d.demand * float(g[prob.slices[d.od]].min()) for d in prob.active)
    return (used - best) / used if used > 0 else 0.0


def solve_due(
    network: Network,
    route_set: RouteSet,
    demands: Iterable[ODPair],
    options: SolverOptions | None = None,
) -> EquilibriumSolution:
    """Wardrop equilibrium over the route set via projected gradient descent.

    All-or-nothing start at free-flow times, per-OD simplex projection and
    Armijo backtracking on the Beckmann objective; converged when the relative
    gap drops below the KKT tolerance.
    """
    options = options or SolverOptions()
    prob = _PathProblem(network, route_set, _normalize_demands(demands, route_set))
    if options.init == "random":
        f = prob.initial_flows(options)
    else:
        f = _aon(prob, prob.times(np.zeros(route_set.n_routes)))
    step = None
    trace: list[tuple[int, float, float]] = []
    converged = False
    iterations = 0
    gap = math.inf
    for k in range(1, options.max_iterations + 1):
        iterations = k
        g = prob.times(f)
        gap = _relative_gap(prob, f, g)
        z1 = prob.beckmann(f)
        trace.append((k, z1, gap))
        if gap <= options.kkt_tolerance:
            converged = True
            break
        if step is None:
            step = prob.total_demand / max(float(g.max()), np.finfo(float).tiny)
        step *= 2.0
        while True:
            trial = f.copy()
            for d in prob.active:
                sl = prob.slices[d.od]
                trial[sl] = _project_simplex(f[sl] - step * g[sl], d.demand)
            decrease = prob.beckmann(trial) - z1
            if decrease <= _ARMIJO_DECREASE * float(g @ (trial - f)) or step <= _ARMIJO_MIN_STEP:
                break
            step *= 0.5
        moved = float(np.abs(trial - f).max())
        f = trial
        if moved <= options.flow_tolerance * max(1.0, prob.total_demand):
            g = prob.times(f)
            gap = _relative_gap(prob, f, g)
            converged = gap <= options.kkt_tolerance
            break
    state = prob.state(f)
    z1 = prob.beckmann(f)
    return EquilibriumSolution(
        model="due",
        flow=state,
        bounds=None,
        probabilities=prob.probabilities(f),
        objective=z1,
        z1=z1,
        z2=0.0,
        kkt_residual=gap,
        iterations=iterations,
        converged=converged,
        trace=trace,
        route_set=route_set,
        demands=prob.demands,
        notes=("relative gap reported as the convergence residual",),
    )


# --- probability fixed points (MNL-SUE, BSUE) -------------------------------------


def _solve_probability_fixed_point(
    prob: _PathProblem,
    prob_fn: Callable[[np.ndarray], np.ndarray],
    options: SolverOptions,
    objective_value: Callable[[np.ndarray], float],
) -> tuple[np.ndarray, list[tuple[int, float, float]], int, bool, float]:
    """MSA iteration of ``f <- f + (target - f)/k`` with ``target = q * P(g(f))``."""
    f = prob.initial_flows(options)
    trace: list[tuple[int, float, float]] = []
    converged = False
    iterations = 0
    res = math.inf
    for k in range(1, options.max_iterations + 1):
        iterations = k
        g = prob.times(f)
        target = np.zeros_like(f)
        for d in prob.active:
            sl = prob.slices[d.od]
            target[sl] = d.demand * prob_fn(g[sl])
        res = max(
            float(np.abs(f[prob.slices[d.od]] - target[prob.slices[d.od]]).max()) / d.demand
            for d in prob.active
        )
        trace.append((k, objective_value(f), res))
        if res <= options.kkt_tolerance:
            converged = True
            break
        f = f + (target - f) / k
    return f, trace, iterations, converged, res


def solve_mnl_sue(
    network: Network,
    route_set: RouteSet,
    demands: Iterable[ODPair],
    dispersion: float,
    options: SolverOptions | None = None,
) -> EquilibriumSolution:
    """Logit SUE: MSA fixed point of ``f = q * mnl_prob(g(f))``.

    Every route keeps a strictly positive flow (the entropy term forbids zero
    flow); the reported objective is the entropy-based program
    ``Z1 + (1/dispersion) * sum f (ln f - 1)``.
    """
    if not dispersion > 0:
        raise DomainError(f"dispersion must be > 0, got {dispersion}")
    options = options or SolverOptions()
    prob = _PathProblem(network, route_set, _normalize_demands(demands, route_set))

    def decompose(f: np.ndarray) -> tuple[float, float, float]:
        z1 = prob.beckmann(f)
        fx = f[f > 0]
        z2 = float(np.sum(fx * (np.log(fx) - 1.0))) / dispersion
        return z1 + z2, z1, z2

    f, trace, iterations, converged, res = _solve_probability_fixed_point(
        prob, lambda g: mnl_prob(g, dispersion).probs, options, lambda x: decompose(x)[0]
    )
    state = prob.state(f)
    z, z1, z2 = decompose(f)
    return EquilibriumSolution(
        model="mnl-sue",
        flow=state,
        bounds=None,
        probabilities=prob.probabilities(f),
        objective=z,
        z1=z1,
        z2=z2,
        kkt_residual=res,
        iterations=iterations,
        converged=converged,
        trace=trace,
        route_set=route_set,
        demands=prob.demands,
        notes=("fixed-point residual reported as the convergence residual",),
    )


def solve_bsue_fixed_point(
    network: Network,
    route_set: RouteSet,
    demands: Iterable[ODPair],
    scale: float,
    threshold: float,
    options: SolverOptions | None = None,
) -> EquilibriumSolution:
    """Bounded-choice SUE: MSA-averaged fixed point of ``f = q * bc_prob(g(f))``.

    Routes whose gap to the fastest route reaches the threshold end at exactly
    zero flow; the per-OD effective cutoff ``min g + threshold`` is reported
    as the bound.
    """
    if not scale > 0:
        raise DomainError(f"scale must be > 0, got {scale}")
    if threshold < 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    options = options or SolverOptions()
    prob = _PathProblem(network, route_set, _normalize_demands(demands, route_set))
    f, trace, iterations, converged, res = _solve_probability_fixed_point(
        prob, lambda g: bc_prob(g, scale, threshold).probs, options, prob.beckmann
    )
    # snap routes beyond the cutoff to exactly zero flow and rescale
    g = prob.times(f)
    lowers: dict[OD, float] = {}
    ranges: dict[OD, float] = {}
    for d in prob.active:
        sl = prob.slices[d.od]
        gmin = float(g[sl].min())
        lowers[d.od] = gmin
        ranges[d.od] = threshold
        cut = g[sl] - gmin >= threshold
        if cut.any():
            kept = f[sl].copy()
            kept[cut] = 0.0
            total = kept.sum()
            if total <= 0:
                raise SolverError(f"OD {d.od}: bounded-choice threshold excluded every route")
            f[sl] = kept * (d.demand / total)
    state = prob.state(f)
    g = state.route_times
    res = max(
        float(
            np.abs(
                f[prob.slices[d.od]]
                - d.demand * bc_prob(g[prob.slices[d.od]], scale, threshold).probs
            ).max()
        )
        / d.demand
        for d in prob.active
    )
    # thresholds move with the snapped times
    for d in prob.active:
        lowers[d.od] = float(g[prob.slices[d.od]].min())
    z1 = prob.beckmann(f)
    return EquilibriumSolution(
        model="bsue",
        flow=state,
        bounds=BoundState("threshold", lowers, ranges),
        probabilities=prob.probabilities(f),
        objective=z1,
        z1=z1,
        z2=0.0,
        kkt_residual=res,
        iterations=iterations,
        converged=converged,
        trace=trace,
        route_set=route_set,
        demands=prob.demands,
        notes=(
            "fixed-point residual reported as the convergence residual",
            "no equivalent convex program; objective is the Beckmann term only",
        ),
    )
