import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fpheat.quadrature import gauss_jacobi01, gauss_legendre, merge_breaks, panel_rule, sphere_area, sphere_rule


@given(st.integers(1, 20))
def test_gauss_legendre_polynomials(n):
    t, w = gauss_legendre(n)
    for k in range(2 * n):
        assert np.sum(w * t**k) == pytest.approx(1.0 / (k + 1), rel=1e-12)


@given(st.integers(2, 20), st.floats(-0.9, 3.0))
def test_gauss_jacobi_moments(n, alpha):
    t, w = gauss_jacobi01(n, alpha)
    for k in range(2 * n - 1):
        assert np.sum(w * t**k) == pytest.approx(1.0 / (k + alpha + 1), rel=1e-10)


def test_gauss_jacobi_rejects():
    with pytest.raises(ValueError):
        gauss_jacobi01(4, -1.0)


@pytest.mark.parametrize("d,area", [(1, 2.0), (2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere(d, area):
    assert sphere_area(d) == pytest.approx(area)
    dirs, w = sphere_rule(d, 16)
    assert np.sum(w) == pytest.approx(area)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    m = len(dirs)
    # antipodal layout: index k + m/2 is the antipode of k
    assert np.allclose(dirs[m // 2:], -dirs[: m // 2])


def test_sphere_rule_integrates_quadratics():
    dirs, w = sphere_rule(3, 16)
    assert np.sum(w * dirs[:, 0] ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-10)


def test_panels_and_breaks():
    b = merge_breaks(np.array([0.0, 1.0, 2.0]), [0.5, 3.0, -1.0], 0.0, 2.0)
    assert np.allclose(b, [0.0, 0.5, 1.0, 2.0])
    x, w = panel_rule(b, 4)
    assert np.sum(w) == pytest.approx(2.0)
    assert np.sum(w * np.abs(x - 0.5)) == pytest.approx(0.125 + 1.125, rel=1e-12)
