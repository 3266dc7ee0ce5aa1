import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpheat.core import GridField, SpaceTimeField, UniformGrid, ZeroExtension, make_params
from fpheat.regularity import NoSignalError, spatial_lipschitz_estimate, temporal_exponent_estimate, regularity_report

G = UniformGrid((0.0,), (1.0,), 0.01)
REGION = ([-0.5], [0.5])


def test_spatial_linear():
    est = spatial_lipschitz_estimate(GridField.from_function(lambda x: 3 * x[:, 0], G), REGION)
    assert est.lipschitz == pytest.approx(3.0, rel=1e-12)
    assert est.kappa == pytest.approx(1.0, abs=1e-9)


def test_spatial_constant():
    est = spatial_lipschitz_estimate(GridField.from_function(lambda x: np.full(len(x), 2.0), G), REGION)
    assert est.lipschitz == 0.0


def test_spatial_sqrt_power():
    est = spatial_lipschitz_estimate(GridField.from_function(lambda x: np.abs(x[:, 0]) ** 0.5, G), REGION)
    assert est.kappa == pytest.approx(0.5, abs=0.05)


def test_spatial_region_too_small():
    with pytest.raises(ValueError):
        spatial_lipschitz_estimate(GridField.from_function(lambda x: x[:, 0], G), ([0.001], [0.002]))


TIMES = np.linspace(0, 1, 257)


def test_temporal_linear():
    tr = SpaceTimeField.from_function(lambda x, t: np.full(len(x), t), G, TIMES)
    est = temporal_exponent_estimate(tr, REGION)
    assert est.alpha == pytest.approx(1.0, abs=1e-9) and est.r2 == pytest.approx(1.0, abs=1e-12)


def test_temporal_sqrt_exact():
    tr = SpaceTimeField.from_function(lambda x, t: np.full(len(x), np.sqrt(t)), G, TIMES)
    est = temporal_exponent_estimate(tr, REGION)
    assert est.alpha == pytest.approx(0.5, abs=1e-9)


def test_temporal_no_signal():
    tr = SpaceTimeField.from_function(lambda x, t: np.ones(len(x)), G, TIMES)
    with pytest.raises(NoSignalError, match="no signal"):
        temporal_exponent_estimate(tr, REGION)
    v = regularity_report(SpaceTimeField(G, TIMES, tr.values, ZeroExtension()), make_params(0.5, 3), region=REGION)
    assert v.passed and "vacuous" in v.note


def test_temporal_needs_separations():
    tr = SpaceTimeField.from_function(lambda x, t: np.full(len(x), t), G, np.linspace(0, 1, 9))
    with pytest.raises(ValueError):
        temporal_exponent_estimate(tr, REGION)


@settings(max_examples=10)
@given(st.floats(-3, 3), st.floats(-3, 3).filter(lambda v: abs(v) > 0.05))
def test_estimates_shift_and_scale(c, lam):
    f = lambda x, t: np.sin(3 * x[:, 0]) * np.exp(-t) + t**0.75
    base = SpaceTimeField.from_function(f, G, TIMES)
    mod = SpaceTimeField(G, TIMES, lam * base.values + c, None)
    s0, s1 = (spatial_lipschitz_estimate(tr.slice(10), REGION) for tr in (base, mod))
    assert s1.lipschitz == pytest.approx(abs(lam) * s0.lipschitz, rel=1e-9)
    t0, t1 = (temporal_exponent_estimate(tr, REGION) for tr in (base, mod))
    assert t1.alpha == pytest.approx(t0.alpha, abs=1e-9)
