import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpheat.comparison import OrderedPair, OrderError, check_comparison, ordering_gap_trace, random_bump, \
    random_ordered_pair
from fpheat.core import ConstantExtension, GridField, UniformGrid, ZeroExtension, make_params
from fpheat.evolution import EvolveControls

P3 = make_params(0.5, 3)
G = UniformGrid((0.0,), (1.0,), 0.02)
CTL = EvolveControls(0.02)


def const_pair(a=1.0, b=0.0):
    return OrderedPair(GridField(G, np.full(G.shape, a), ConstantExtension(a)),
                       GridField(G, np.full(G.shape, b), ConstantExtension(b)))


def test_trivial_pair_no_violations_and_unit_gap():
    rep = check_comparison(const_pair(), CTL, P3)
    assert rep.count == 0 and rep.ok
    gaps = ordering_gap_trace(const_pair(), CTL, P3)
    assert all(g == 1.0 for _, g in gaps)


def test_equal_pair_ties_allowed():
    u = GridField(G, random_bump(G, np.random.default_rng(0)), ZeroExtension())
    assert check_comparison(OrderedPair(u, u), CTL, P3).count == 0


def test_unordered_rejected_with_node():
    u = GridField(G, np.zeros(G.shape), ZeroExtension())
    v = np.zeros(G.shape)
    v[17] = 1e-9
    with pytest.raises(OrderError, match=r"node \(17,\)"):
        OrderedPair(u, GridField(G, v, ZeroExtension()))


def test_tail_order_rejected():
    u = GridField(G, np.zeros(G.shape), ZeroExtension())
    v = GridField(G, np.zeros(G.shape), ConstantExtension(0.1))
    with pytest.raises(OrderError, match="exterior"):
        OrderedPair(u, v)


def test_initial_gap_is_min_difference():
    pair = random_ordered_pair(G, np.random.default_rng(4))
    gaps = ordering_gap_trace(pair, CTL, P3)
    assert gaps[0][1] == float(np.min(pair.upper.values - pair.lower.values))
    assert all(g >= 0 for _, g in gaps)


def test_strict_gap_shrinks():
    x = G.nodes()[:, 0]
    up = np.where(np.abs(x) < 0.5, np.cos(np.pi * x) ** 2, 0.0)
    pair = OrderedPair(GridField(G, up, ZeroExtension()), GridField(G, 0.5 * up, ZeroExtension()))
    gaps = [g for _, g in ordering_gap_trace(pair, CTL, P3)]
    assert min(gaps) >= 0


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1), st.floats(-2, 2))
def test_random_pairs_and_constant_shift(seed, c):
    pair = random_ordered_pair(G, np.random.default_rng(seed))
    shifted = OrderedPair(GridField(G, pair.upper.values + c, ConstantExtension(c)),
                          GridField(G, pair.lower.values + c, ConstantExtension(c)))
    a = check_comparison(pair, CTL, P3)
    b = check_comparison(shifted, CTL, P3)
    assert a.count == 0 and b.count == 0
    assert a.steps == b.steps
