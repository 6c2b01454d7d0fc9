"""Monte-Carlo ERUM sampler: determinism, backend equivalence, convergence."""

from __future__ import annotations

import numpy as np
import pytest

from eunit_sue._backend import available_backends
from eunit_sue.choice import (
    erum_choice_counts,
    erum_choice_frequencies,
    erum_sample_choice,
    eunit_prob,
)
from eunit_sue.errors import DomainError

NEEDS_COMPILED = pytest.mark.skipif(
    "cython" not in available_backends(), reason="compiled kernel not built"
)


class TestDeterminism:
    def test_same_seed_same_counts(self):
        a = erum_choice_counts([3.0, 1.0], 10000, seed=5)
        b = erum_choice_counts([3.0, 1.0], 10000, seed=5)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        a = erum_choice_counts([3.0, 1.0], 10000, seed=5)
        b = erum_choice_counts([3.0, 1.0], 10000, seed=6)
        assert not np.array_equal(a, b)

    def test_worker_count_independence(self):
        serial = erum_choice_counts([3.0, 1.0, 0.5], 300000, seed=9, workers=1)
        threaded = erum_choice_counts([3.0, 1.0, 0.5], 300000, seed=9, workers=4)
        assert np.array_equal(serial, threaded)

    def test_sample_choice_deterministic(self):
        picks = {erum_sample_choice([2.0, 1.0, 1.0], seed=3) for _ in range(5)}
        assert len(picks) == 1


@NEEDS_COMPILED
class TestBackendEquivalence:
    def test_identical_counts(self):
        for seed in (0, 1, 17):
            fast = erum_choice_counts([3.0, 1.0, 0.5], 200000, seed=seed, backend="cython")
            slow = erum_choice_counts([3.0, 1.0, 0.5], 200000, seed=seed, backend="python")
            assert np.array_equal(fast, slow)

    def test_identical_across_chunk_boundaries(self):
        # n chosen to leave a ragged final chunk
        n = (1 << 16) + 12345
        fast = erum_choice_counts([1.0, 2.0], n, seed=4, backend="cython")
        slow = erum_choice_counts([1.0, 2.0], n, seed=4, backend="python")
        assert np.array_equal(fast, slow)
        assert fast.sum() == n


class TestConvergence:
    def test_symmetric_weights(self):
        freq = erum_choice_frequencies([1.0, 1.0], 10**6, seed=0).probs
        se = np.sqrt(0.25 / 10**6)
        assert abs(freq[0] - 0.5) <= 3 * se

    def test_weights_3_1(self):
        freq = erum_choice_frequencies([3.0, 1.0], 10**6, seed=1).probs
        se = np.sqrt(0.75 * 0.25 / 10**6)
        assert abs(freq[0] - 0.75) <= 3 * se

    def test_single_alternative(self):
        freq = erum_choice_frequencies([2.0], 100, seed=0).probs
        assert freq[0] == 1.0

    def test_matches_eunit_closed_form(self):
        g = np.array([5.0, 6.0, 7.5])
        lower, upper = 4.0, 8.0
        probs = eunit_prob(g, lower, upper).probs
        weights = (upper - g) / (g - lower)
        freq = erum_choice_frequencies(weights, 10**6, seed=2).probs
        se = np.sqrt(probs * (1 - probs) / 10**6)
        assert np.all(np.abs(freq - probs) <= 3 * se)


class TestValidation:
    def test_rejects_nonpositive_weights(self):
        with pytest.raises(DomainError):
            erum_choice_counts([1.0, 0.0], 10, seed=0)
        with pytest.raises(DomainError):
            erum_choice_counts([], 10, seed=0)

    def test_rejects_zero_samples(self):
        with pytest.raises(DomainError):
            erum_choice_counts([1.0], 0, seed=0)
