"""Closed-form route choice kernels and their simulation counterpart.

Implements the multinomial logit (MNL), multinomial weibit (MNW), bounded
choice (BC) and eUnit probability kernels, the exponentiated uniform
distribution behind the eUnit model, and a Monte-Carlo sampler for the
exponentiated random-utility (ERUM) form used to validate the closed forms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._backend import count_chunk as _count_chunk
from ._backend import get_count_chunk
from .errors import DomainError, EmptySupportError

_PROB_SUM_TOL = 1e-12
# Never engaged for valid inputs; keeps the weight ratio finite if a caller
# probes the l boundary.
_DENOM_FLOOR = 1e-300


@dataclass(frozen=True)
class MNLParams:
    dispersion: float

    def __post_init__(self) -> None:
        if not self.dispersion > 0:
            raise DomainError(f"MNL dispersion must be > 0, got {self.dispersion}")


@dataclass(frozen=True)
class MNWParams:
    shape: float
    location: float = 0.0

    def __post_init__(self) -> None:
        if not self.shape > 0:
            raise DomainError(f"MNW shape must be > 0, got {self.shape}")
        if self.location < 0:
            raise DomainError(f"MNW location must be >= 0, got {self.location}")


@dataclass(frozen=True)
class BCParams:
    scale: float
    threshold: float

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise DomainError(f"BC scale must be > 0, got {self.scale}")
        if self.threshold < 0:
            raise DomainError(f"BC threshold must be >= 0, got {self.threshold}")


@dataclass(frozen=True)
class EUnitParams:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise DomainError(
                f"eUnit bounds require upper > lower, got ({self.lower}, {self.upper})"
            )

    @property
    def bound_range(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class EUnitBoundRange:
    """eUnit parameterisation by bound range alone; the lower bound is
    determined endogenously by the equilibrium solver."""

    bound_range: float

    def __post_init__(self) -> None:
        if not self.bound_range > 0:
            raise DomainError(f"eUnit bound range must be > 0, got {self.bound_range}")


ChoiceModelParams = Union[MNLParams, MNWParams, BCParams, EUnitParams, EUnitBoundRange]


@dataclass(frozen=True)
class ExpUniform:
    """Exponentiated uniform distribution on (lower, upper) with shape beta.

    CDF ``((x - l)/(u - l))**beta``; beta = 1 reduces to the ordinary uniform.
    """

    lower: float
    upper: float
    shape: float

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise DomainError(
                f"exp-uniform requires upper > lower, got ({self.lower}, {self.upper})"
            )
        if not self.shape > 0:
            raise DomainError(f"exp-uniform shape must be > 0, got {self.shape}")


@dataclass(frozen=True)
class ProbVector:
    """Per-route probabilities plus the used/unused support mask.

    Entries off the support are exactly zero; on-support entries sum to one.
    """

    probs: np.ndarray
    support: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        support = np.asarray(self.support, dtype=bool)
        if probs.shape != support.shape:
            raise DomainError("probs and support must have matching shapes")
        if np.any(probs < 0):
            raise DomainError("negative probability")
        if abs(probs.sum() - 1.0) > _PROB_SUM_TOL:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        if np.any(probs[~support] != 0.0):
            raise DomainError("non-zero probability on an unused route")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "support", support)
        probs.flags.writeable = False
        support.flags.writeable = False

    def __len__(self) -> int:
        return len(self.probs)


def _as_times(times) -> np.ndarray:
    g = np.atleast_1d(np.asarray(times, dtype=float))
    if g.size == 0:
        raise DomainError("empty travel time vector")
    if not np.all(np.isfinite(g)):
        raise DomainError("travel times must be finite")
    return g


def _normalize(weights: np.ndarray, support: np.ndarray) -> ProbVector:
    total = weights.sum()
    probs = weights / total
    # exact zeros survive the division; renormalise residual rounding onto the
    # largest entry so sums are exact
    err = probs.sum() - 1.0
    if err != 0.0:
        probs[np.argmax(probs)] -= err
    return ProbVector(probs=probs, support=support)


def mnl_prob(times, dispersion: float) -> ProbVector:
    """MNL probabilities ``P_r = exp(-dispersion*g_r) / sum_k exp(-dispersion*g_k)``.

    Computed with a max-shift so large inputs cannot overflow.
    """
    g = _as_times(times)
    if not dispersion > 0:
        raise DomainError(f"dispersion must be > 0, got {dispersion}")
    z = -dispersion * g
    z -= z.max()
    w = np.exp(z)
    return _normalize(w, np.ones_like(w, dtype=bool))


def mnw_prob(times, shape: float, location: float = 0.0) -> ProbVector:
    """MNW probabilities ``P_r proportional to (g_r - location)**(-shape)``."""
    g = _as_times(times)
    if not shape > 0:
        raise DomainError(f"shape must be > 0, got {shape}")
    if np.any(g <= location):
        raise DomainError(f"all travel times must exceed the location {location}")
    # log-space for overflow safety at large shapes
    z = -shape * np.log(g - location)
    z -= z.max()
    w = np.exp(z)
    return _normalize(w, np.ones_like(w, dtype=bool))


def mnw_variance(time: float, shape: float, location: float = 0.0) -> float:
    """Perception variance of the MNW (Weibull) perceived time with the given mean.

    Uses the Weibull moments with the scale chosen so the mean equals
    ``time - location``; grows with the travel time.
    """
    if not shape > 0:
        raise DomainError(f"shape must be > 0, got {shape}")
    if time < location:
        raise DomainError(f"time {time} below location {location}")
    g1 = math.gamma(1.0 + 1.0 / shape)
    g2 = math.gamma(1.0 + 2.0 / shape)
    scale = (time - location) / g1
    return scale * scale * (g2 - g1 * g1)


def bc_prob(times, scale: float, threshold: float) -> ProbVector:
    """Bounded-choice probabilities with a hard cutoff at ``min g + threshold``.

    ``P_r`` is proportional to ``(exp(-scale*(g_r - min g - threshold)) - 1)_+``;
    routes at or beyond the cutoff get exactly zero.  Weights are formed in
    log space so large ``scale*threshold`` cannot overflow.
    """
    g = _as_times(times)
    if not scale > 0:
        raise DomainError(f"scale must be > 0, got {scale}")
    if threshold < 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    y = scale * (g.min() + threshold - g)
    support = y > 0
    if not support.any():
        raise EmptySupportError("no route within the bounded-choice threshold")
    # log(exp(y) - 1) = y + log1p(-exp(-y)) for y > 0
    logw = np.full_like(g, -np.inf)
    ys = y[support]
    logw[support] = ys + np.log1p(-np.exp(-ys))
    logw -= logw[support].max()
    w = np.zeros_like(g)
    w[support] = np.exp(logw[support])
    return _normalize(w, support)


def eunit_weights(times, lower: float, upper: float) -> np.ndarray:
    """Raw eUnit weights ``((u - g)/(g - l))_+`` with exact zeros at ``g >= u``."""
    g = _as_times(times)
    if not upper > lower:
        raise DomainError(f"bounds require upper > lower, got ({lower}, {upper})")
    if np.any(g <= lower):
        raise DomainError(
            f"travel time at or below the lower bound {lower}; perceived-time floor violated"
        )
    w = np.zeros_like(g)
    inside = g < upper
    w[inside] = (upper - g[inside]) / np.maximum(g[inside] - lower, _DENOM_FLOOR)
    return w


def eunit_prob(times, lower: float, upper: float) -> ProbVector:
    """eUnit probabilities ``P_r proportional to ((u - g_r)/(g_r - l))_+``.

    Routes at or beyond the upper bound get exactly zero; times at or below
    the lower bound are a domain error (the equilibrium lower bound always
    sits strictly below every route cost).
    """
    w = eunit_weights(times, lower, upper)
    support = w > 0
    if not support.any():
        raise EmptySupportError(
            f"no route strictly inside the bounds ({lower}, {upper})"
        )
    return _normalize(w, support)


def eunit_prob_from_utilities(utilities, lower: float, upper: float) -> ProbVector:
    """eUnit probabilities in utility orientation: ``P_r proportional to (V_r - l)/(u - V_r)``.

    All utilities must lie strictly inside ``(lower, upper)``.
    """
    v = _as_times(utilities)
    if not upper > lower:
        raise DomainError(f"bounds require upper > lower, got ({lower}, {upper})")
    if np.any(v <= lower) or np.any(v >= upper):
        raise DomainError(f"utilities must lie strictly inside ({lower}, {upper})")
    w = (v - lower) / (upper - v)
    return _normalize(w, np.ones_like(w, dtype=bool))


def exp_uniform_cdf(x: float, dist: ExpUniform, clamp: bool = False) -> float:
    """CDF of the exponentiated uniform distribution at ``x``."""
    if x < dist.lower or x > dist.upper:
        if not clamp:
            raise DomainError(f"x={x} outside [{dist.lower}, {dist.upper}]")
        x = min(max(x, dist.lower), dist.upper)
    return ((x - dist.lower) / (dist.upper - dist.lower)) ** dist.shape


def exp_uniform_quantile(p: float, dist: ExpUniform) -> float:
    """Inverse CDF: ``l + (u - l) * p**(1/beta)``."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability {p} outside [0, 1]")
    return dist.lower + (dist.upper - dist.lower) * p ** (1.0 / dist.shape)


def exp_uniform_moments(dist: ExpUniform) -> tuple[float, float]:
    """Mean ``(u*beta + l)/(beta + 1)`` and variance
    ``beta*(u - l)**2 / ((beta + 1)**2 * (beta + 2))``."""
    b = dist.shape
    mean = (dist.upper * b + dist.lower) / (b + 1.0)
    var = b * (dist.upper - dist.lower) ** 2 / ((b + 1.0) ** 2 * (b + 2.0))
    return mean, var


def eunit_variance(time: float, lower: float, upper: float) -> float:
    """Route-specific perception variance at travel time strictly inside the bounds.

    Equals the exponentiated-uniform variance at shape ``(g - l)/(u - g)``;
    algebraically ``d1*d2**2/(d1 + 2*d2)`` with ``d1 = g - l``, ``d2 = u - g``,
    which vanishes as the time approaches either bound.
    """
    if not upper > lower:
        raise DomainError(f"bounds require upper > lower, got ({lower}, {upper})")
    if not lower < time < upper:
        raise DomainError(f"time {time} not strictly inside ({lower}, {upper})")
    d1 = time - lower
    d2 = upper - time
    return d1 * d2 * d2 / (d1 + 2.0 * d2)


def sensitivity(t: float, params: ChoiceModelParams) -> float:
    """Sensitivity of the choice kernel to a travel time change at ``t``.

    MNL: ``-dispersion*t`` (uniform sensitivity); MNW: ``-shape*ln(t)`` (more
    sensitive near zero); eUnit: ``-ln((t - l)/(u - t))``, diverging to +/-inf
    at the lower/upper bound.
    """
    if isinstance(params, MNLParams):
        return -params.dispersion * t
    if isinstance(params, MNWParams):
        if not t > 0:
            raise DomainError(f"MNW sensitivity requires t > 0, got {t}")
        return -params.shape * math.log(t)
    if isinstance(params, EUnitParams):
        if not params.lower < t < params.upper:
            raise DomainError(
                f"t={t} not strictly inside ({params.lower}, {params.upper})"
            )
        return -math.log((t - params.lower) / (params.upper - t))
    raise DomainError(f"no sensitivity function for {type(params).__name__}")


# --- Monte-Carlo ERUM oracle ------------------------------------------------
#
# A choice is drawn by sampling iid uniforms e_r on (0,1) and maximising
# U_r = e_r**(1/w_r); the frequencies converge to w_r / sum w_k.  The stream
# is keyed per chunk of samples (Philox counter advance), so the tally is
# independent of chunking and worker count for a fixed seed.

_CHUNK_SAMPLES = 1 << 16  # multiple of 4: Philox advances in 4-double blocks


def _as_weights(weights) -> np.ndarray:
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.size == 0:
        raise DomainError("empty weight vector")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be positive and finite")
    return w


def _chunk_generator(seed: int, start: int, n_alternatives: int) -> np.random.Philox:
    bg = np.random.Philox(key=seed)
    draws = start * n_alternatives
    # one Philox counter block is four 64-bit doubles
    bg.advance(draws // 4)
    return bg


def erum_sample_choice(weights, seed: int) -> int:
    """One exponentiated-random-utility draw; the argmax of ``u_r**(1/w_r)``."""
    w = _as_weights(weights)
    bg = _chunk_generator(seed, 0, w.size)
    u = np.random.Generator(bg).random(w.size)
    return int(np.argmax(u ** (1.0 / w)))


def erum_choice_counts(
    weights,
    n_samples: int,
    seed: int,
    workers: int = 1,
    backend: str | None = None,
) -> np.ndarray:
    """Choice tallies over ``n_samples`` ERUM draws (deterministic in ``seed``)."""
    w = _as_weights(weights)
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    inv_w = 1.0 / w
    kernel = _count_chunk if backend is None else get_count_chunk(backend)
    starts = range(0, n_samples, _CHUNK_SAMPLES)

    def run(start: int) -> np.ndarray:
        local = np.zeros(w.size, dtype=np.int64)
        kernel(
            _chunk_generator(seed, start, w.size),
            inv_w,
            local,
            min(_CHUNK_SAMPLES, n_samples - start),
        )
        return local

    if workers <= 1:
        counts = np.zeros(w.size, dtype=np.int64)
        for start in starts:
            counts += run(start)
        return counts
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(run, starts), np.zeros(w.size, dtype=np.int64))


def erum_choice_frequencies(
    weights,
    n_samples: int,
    seed: int,
    workers: int = 1,
    backend: str | None = None,
) -> ProbVector:
    """Empirical ERUM choice frequencies; converges to ``w_r / sum w_k``."""
    counts = erum_choice_counts(weights, n_samples, seed, workers=workers, backend=backend)
    freq = counts / counts.sum()
    return _normalize(freq.astype(float), np.ones(counts.size, dtype=bool))
