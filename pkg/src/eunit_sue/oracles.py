"""Independent verification oracles.

These deliberately avoid the production code paths: the link cost integral is
re-evaluated by adaptive quadrature, gradients by central differences, and the
equilibrium program by dense constrained minimisation from raw arrays.  They
exist to check the closed forms and solvers, not to be fast.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize


def quadrature_link_integral(fftt, capacity, alpha, beta, v) -> float:
    """Numerically integrate the BPR time from 0 to v (no closed form used)."""
    val, _ = integrate.quad(
        lambda w: fftt * (1.0 + alpha * (w / capacity) ** beta), 0.0, v, epsabs=1e-13, epsrel=1e-13
    )
    return val


def central_difference_gradient(fun: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = h * max(1.0, abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += step
        dn[i] -= step
        grad[i] = (fun(up) - fun(dn)) / (2.0 * step)
    return grad


def single_route_lower_bound(route_time: float, bound_range: float, demand: float) -> float:
    """Closed-form inversion of the demand identity for one route: g - b/(q+1)."""
    return route_time - bound_range / (demand + 1.0)


def two_route_lower_bound(g1: float, g2: float, bound_range: float, demand: float) -> float:
    """Quadratic-formula root of the two-route demand identity (both routes used).

    Expanding (l+b-g1)(g2-l) + (l+b-g2)(g1-l) = q (g1-l)(g2-l) and collecting
    powers of l gives -(2+q) l^2 + ((2+q)s - 2b) l + (bs - (2+q)p) = 0 with
    s = g1+g2, p = g1*g2; the root below min(g1, g2) is the valid one.
    """
    b, q = bound_range, demand
    s, p = g1 + g2, g1 * g2
    a2 = -(2.0 + q)
    a1 = (2.0 + q) * s - 2.0 * b
    a0 = b * s - (2.0 + q) * p
    disc = a1 * a1 - 4.0 * a2 * a0
    roots = np.roots([a2, a1, a0])
    roots = np.real(roots[np.isreal(roots)])
    valid = roots[roots < min(g1, g2)]
    if valid.size == 0:
        raise ValueError(f"no valid root (disc={disc})")
    return float(valid.max())


def bisection_lower_bound(route_times, bound_range: float, demand: float, iters: int = 200) -> float:
    """Plain bisection on the demand identity; slow but unconditionally correct."""
    g = np.asarray(route_times, dtype=float)
    lo, hi = g.min() - bound_range, g.min() - 1e-14 * max(1.0, abs(g.min()))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        w = np.clip(mid + bound_range - g, 0.0, None) / (g - mid)
        if w.sum() < demand:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dense_route_flow_oracle(
    fftt: Sequence[float],
    capacity: Sequence[float],
    alpha: Sequence[float],
    beta: Sequence[float],
    incidence: np.ndarray,
    od_of_route: Sequence[int],
    demands: Sequence[float],
    bound_ranges: Sequence[float],
    n_starts: int = 4,
    seed: int = 0,
) -> np.ndarray:
    """Brute-force minimisation of the equilibrium program from raw arrays.

    Dense SLSQP with per-OD equality constraints and nonnegativity bounds,
    restarted from several feasible points; the best objective wins.  With a
    zero bound range this is plain Beckmann minimisation (DUE).  Entirely
    self-contained: BPR terms are evaluated inline from the raw parameters.
    """
    t0 = np.asarray(fftt, dtype=float)
    cap = np.asarray(capacity, dtype=float)
    al = np.asarray(alpha, dtype=float)
    be = np.asarray(beta, dtype=float)
    inc = np.asarray(incidence, dtype=float)
    od_of_route = np.asarray(od_of_route, dtype=int)
    q = np.asarray(demands, dtype=float)
    b = np.asarray(bound_ranges, dtype=float)
    n_routes = inc.shape[0]

    def objective(f: np.ndarray) -> float:
        v = inc.T @ np.clip(f, 0.0, None)
        z1 = float(np.sum(t0 * v * (1.0 + al / (be + 1.0) * (v / cap) ** be)))
        z2 = -float(np.sum(b[od_of_route] * np.log1p(np.clip(f, 0.0, None))))
        return z1 + z2

    def gradient(f: np.ndarray) -> np.ndarray:
        v = inc.T @ np.clip(f, 0.0, None)
        t = t0 * (1.0 + al * (v / cap) ** be)
        return inc @ t - b[od_of_route] / (np.clip(f, 0.0, None) + 1.0)

    constraints = []
    for j, qj in enumerate(q):
        mask = (od_of_route == j).astype(float)
        constraints.append(
            {"type": "eq", "fun": (lambda f, m=mask, qq=qj: m @ f - qq), "jac": (lambda f, m=mask: m)}
        )
    rng = np.random.default_rng(seed)
    best_f, best_z = None, np.inf
    for s in range(n_starts):
        x0 = np.zeros(n_routes)
        for j, qj in enumerate(q):
            idx = np.flatnonzero(od_of_route == j)
            if s == 0:
                x0[idx] = qj / idx.size
            else:
                w = rng.gamma(1.0, size=idx.size)
                x0[idx] = qj * w / w.sum()
        sol = optimize.minimize(
            objective,
            x0,
            jac=gradient,
            bounds=[(0.0, None)] * n_routes,
            constraints=constraints,
            method="SLSQP",
            options={"maxiter": 600, "ftol": 1e-14},
        )
        z = objective(sol.x)
        if z < best_z:
            best_z, best_f = z, np.clip(sol.x, 0.0, None)
    return best_f
