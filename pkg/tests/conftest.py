from __future__ import annotations

import numpy as np
import pytest

from eunit_sue.network import Link, Network, ODPair, Route, RouteSet


@pytest.fixture
def two_constant_links():
    """Two parallel constant-time links (alpha = 0): route times (5, 6)."""
    net = Network(
        [
            Link(1, 1, 2, fftt=5.0, capacity=100.0, alpha=0.0, beta=1.0),
            Link(2, 1, 2, fftt=6.0, capacity=100.0, alpha=0.0, beta=1.0),
        ]
    )
    rs = RouteSet(net, {(1, 2): [Route(1, 2, (1,)), Route(1, 2, (2,))]})
    return net, rs


@pytest.fixture
def two_identical_bpr_links():
    net = Network(
        [
            Link(1, 1, 2, fftt=4.0, capacity=60.0, alpha=0.3, beta=2.0),
            Link(2, 1, 2, fftt=4.0, capacity=60.0, alpha=0.3, beta=2.0),
        ]
    )
    rs = RouteSet(net, {(1, 2): [Route(1, 2, (1,)), Route(1, 2, (2,))]})
    return net, rs


def assert_prob_vector(pv):
    assert np.all(pv.probs >= 0)
    assert abs(pv.probs.sum() - 1.0) <= 1e-12
    assert np.all(pv.probs[~pv.support] == 0.0)
