import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpheat.core import AnalyticTail, ConstantExtension, GridField, ParabolicCylinder, UniformGrid, ZeroExtension, \
    gagliardo_seminorm, j_p, make_params
from fpheat.experiments import midpoint_ring_reference
from fpheat.operator import (
    NodeOperator,
    QuadConfig,
    QuadraticPatch,
    QuadratureError,
    ScaledTail,
    continuity_scan,
    energy_form,
    frac_p_laplacian_grid,
    frac_p_laplacian_point,
    pv_local_bound,
)

P2 = make_params(0.5, 2)
P3 = make_params(0.5, 3)
P26 = make_params(0.6, 2)


def square_on_unit(y):
    return np.where(np.abs(y[:, 0]) <= 1.0, y[:, 0] ** 2, 0.0)


BREAKS = [np.array([-1.0]), np.array([1.0])]


# -- pointwise catalog ---------------------------------------------------------


@pytest.mark.parametrize("P", [P2, P3, P26])
def test_constant_is_zero(P):
    est = frac_p_laplacian_point(lambda y: np.full(len(y), -1.7), [0.2], P)
    assert abs(est.value) <= 1e-12


@pytest.mark.parametrize("P", [P2, P3, make_params(0.3, 2.5)])
def test_odd_about_x_is_zero(P):
    x = 0.4
    est = frac_p_laplacian_point(lambda y: np.tanh(5 * (y[:, 0] - x)) + 2.0, [x], P)
    assert abs(est.value) <= 1e-10


def test_linear_with_linear_tail_is_zero():
    est = frac_p_laplacian_point(lambda y: 1.0 + 2.0 * y[:, 0], [0.3], P26, growth=1.0)
    assert abs(est.value) <= 1e-10


def test_odd_2d():
    P = make_params(0.5, 2.5, 2)
    est = frac_p_laplacian_point(lambda y: np.sin(y[:, 0] - 0.1) * np.exp(-y[:, 1] ** 2), [0.1, 0.0], P)
    assert abs(est.value) <= 1e-10


@pytest.mark.parametrize("P", [P2, P3, P26])
def test_square_zero_extended(P):
    est = frac_p_laplacian_point(square_on_unit, [0.0], P, breakpoints=BREAKS)
    closed = -2.0 / (2 * P.p - 2 - P.sp)   # -2 int_0^1 y^(2p-3-sp) dy
    ring = midpoint_ring_reference(P)
    assert abs(closed - ring) < 1e-6
    assert est.value == pytest.approx(closed, abs=1e-8)
    assert est.error < 1e-6


def test_square_p2_reference_value():
    assert frac_p_laplacian_point(square_on_unit, [0.0], P2, breakpoints=BREAKS).value == pytest.approx(-2.0, abs=1e-10)


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-0.3, 0.3))
def test_translation_invariance(v, x):
    f = lambda y: np.exp(-y[:, 0] ** 2) * np.cos(y[:, 0])
    a = frac_p_laplacian_point(f, [x], P3).value
    b = frac_p_laplacian_point(lambda y: f(y - v), [x + v], P3).value
    assert b == pytest.approx(a, rel=1e-7, abs=1e-9)


@settings(max_examples=15)
@given(st.floats(-3, 3).filter(lambda t: abs(t) > 1e-2))
def test_scaling_by_j_p(lam):
    f = lambda y: np.exp(-y[:, 0] ** 2)
    a = frac_p_laplacian_point(f, [0.2], P3).value
    b = frac_p_laplacian_point(lambda y: lam * f(y), [0.2], P3).value
    assert b == pytest.approx(float(j_p(lam, 3)) * a, rel=1e-9, abs=1e-12)


def test_gridfield_square_converges_first_order():
    # the multilinear interpolant has a kink at every node; the error is O(h)
    errs = []
    for h in (0.04, 0.02, 0.01):
        u = GridField.from_function(square_on_unit, UniformGrid((0.0,), (2.0,), h))
        errs.append(abs(frac_p_laplacian_point(u, [0.0], P2).value + 2.0))
    assert errs[-1] <= 2.0 * 0.01
    for e0, e1 in zip(errs, errs[1:]):
        assert 1.6 <= e0 / e1 <= 2.6


def test_gridfield_boundary_rejected():
    g = UniformGrid((0.0,), (1.0,), 0.1)
    u = GridField.from_function(lambda y: y[:, 0] ** 2, g)
    with pytest.raises(QuadratureError, match="interpolation boundary"):
        frac_p_laplacian_point(u, [0.98], P2)


# -- grid operator ---------------------------------------------------------------


def test_grid_constant_is_zero():
    g = UniformGrid((0.0,), (1.0,), 0.05)
    u = GridField(g, np.full(g.shape, 0.4), ConstantExtension(0.4))
    out = frac_p_laplacian_grid(u, P3)
    assert np.all(out.values == 0.0)


@given(st.floats(-5, 5))
def test_grid_constant_invariance(c):
    g = UniformGrid((0.0,), (1.0,), 0.05)
    u = GridField.from_function(lambda y: np.cos(3 * y[:, 0]), g)
    a = frac_p_laplacian_grid(u, P3).values
    b = frac_p_laplacian_grid(GridField(g, u.values + c, u.tail.shifted(c)), P3).values
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10 * np.max(np.abs(a)))


def test_grid_linear_with_linear_tail_center_zero():
    g = UniformGrid((0.0,), (1.0,), 0.05)
    tail = AnalyticTail("affine", amplitude=1.0, slope=(2.0,))
    u = GridField.from_function(lambda y: 1.0 + 2.0 * y[:, 0], g, tail)
    out = frac_p_laplacian_grid(u, P26)
    mid = out.values.shape[0] // 2
    assert abs(out.values[mid]) <= 1e-10


def test_grid_pointwise_mode_reports_node():
    g = UniformGrid((0.0,), (1.0,), 0.1)
    u = GridField.from_function(lambda y: y[:, 0] ** 2, g)
    with pytest.raises(QuadratureError, match="interior node"):
        frac_p_laplacian_grid(u, P2, method="pointwise")


def test_node_operator_monotone():
    # raising a neighbour lowers the operator at every other interior node
    g = UniformGrid((0.0,), (1.0,), 0.1)
    rng = np.random.default_rng(3)
    u = rng.normal(size=g.shape)
    op = NodeOperator.build(g, P3)
    base = op.apply(u)
    for j in (0, 5, 10):
        v = u.copy()
        v[j] += 0.3
        A = op.apply(v)
        others = op.interior != j
        assert np.all(A[others] <= base[others])


def test_node_operator_square_center():
    g = UniformGrid((0.0,), (2.0,), 0.01)
    u = GridField.from_function(square_on_unit, g)
    A = frac_p_laplacian_grid(u, P2).values
    assert A[len(A) // 2] == pytest.approx(-2.0, abs=0.05)


# -- local bound ------------------------------------------------------------------


def test_pv_local_bound_trivial():
    assert pv_local_bound(lambda y: np.full(len(y), 2.0), [0.3], 0.1, P3).value == 0.0
    assert pv_local_bound(lambda y: 4.0 * y[:, 0] - 1, [0.3], 0.1, P3).value <= 1e-14


def test_pv_local_bound_square_halvings():
    vals = [pv_local_bound(lambda y: y[:, 0] ** 2, [0.3], e, P2).value for e in (0.1, 0.05, 0.025)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] / vals[0] < 0.5


@settings(max_examples=20)
@given(st.floats(0.2, 3), st.floats(-2, 2), st.floats(-0.5, 0.5), st.sampled_from([(0.5, 2.0), (0.5, 3.0), (0.6, 2.0)]))
def test_pv_local_bound_decreases_for_quadratics(a, b, x, sp):
    P = make_params(*sp)
    w = lambda y: a * y[:, 0] ** 2 + b * y[:, 0]
    seq = [pv_local_bound(w, [x], 0.2 * 0.5**k, P).value for k in range(6)]
    assert all(s1 < s0 for s0, s1 in zip(seq, seq[1:]))
    assert seq[5] < 0.1 * seq[0]


# -- energy form --------------------------------------------------------------------


def bump(x):
    return np.where(np.abs(x[:, 0]) < 0.5, np.cos(np.pi * x[:, 0]) ** 2, 0.0)


def test_energy_form_constant_phi():
    u = lambda x: np.sin(x[:, 0])
    est = energy_form(u, lambda x: np.full(len(x), 2.0), P3, ([-1.0], [1.0]), exterior=False)
    assert abs(est.value) <= 1e-12


@settings(max_examples=8)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_energy_form_linear_in_phi(c1, c2):
    u = lambda x: np.sin(2 * x[:, 0])
    phi1 = bump
    phi2 = lambda x: x[:, 0] * bump(x)
    box = ([-1.0], [1.0])
    e1 = energy_form(u, phi1, P3, box).value
    e2 = energy_form(u, phi2, P3, box).value
    e12 = energy_form(u, lambda x: c1 * phi1(x) + c2 * phi2(x), P3, box).value
    assert e12 == pytest.approx(c1 * e1 + c2 * e2, rel=1e-9, abs=1e-10)


def test_energy_form_diagonal_is_seminorm_power():
    u = lambda x: x[:, 0] ** 2 - 0.3 * x[:, 0]
    box = ([0.0], [1.0])
    E = energy_form(u, u, P3, box, exterior=False)
    G = gagliardo_seminorm(u, box, P3)
    assert E.value == pytest.approx(G.value**3, rel=1e-5)


# -- continuity scan ------------------------------------------------------------------


def test_continuity_static_tail_zero_jump():
    patch = QuadraticPatch(0.2, 0.0, (0.3,), (1.0,))
    cyl = ParabolicCylinder((0.0,), 0.5, 1.0)
    rep = continuity_scan(patch, ConstantExtension(0.1), cyl, P3)
    assert rep.time_jump == 0.0 and rep.local_time_jump == 0.0
    assert rep.finite


def test_continuity_local_part_time_independent():
    patch = QuadraticPatch(0.2, 5.0, (0.3,), (1.0,))
    rep = continuity_scan(patch, ConstantExtension(0.1), ParabolicCylinder((0.0,), 0.5, 1.0), P3)
    assert rep.local_time_jump == 0.0


def test_continuity_scaled_tail_tracks_modulus():
    patch = QuadraticPatch(0.0, 0.0, (0.0,), (2.0,))
    cyl = ParabolicCylinder((0.0,), 0.5, 1.0)
    ratios = []
    for amp in (0.4, 0.2, 0.1):
        fam = ScaledTail(ConstantExtension(1.0), lambda t, a=amp: 1.0 + a * np.sin(t))
        rep = continuity_scan(patch, fam, cyl, P3, nt=9)
        dt = rep.ts[1] - rep.ts[0]
        ratios.append(rep.time_jump / (amp * dt))
    assert max(ratios) < 2.0 * min(ratios)


def test_continuity_spatial_scan_finite():
    P = make_params(0.5, 2.5, 2)
    patch = QuadraticPatch(0.0, 0.0, (0.1, -0.2), (1.0, 0.2, 0.2, 0.5))
    rep = continuity_scan(patch, ZeroExtension(), ParabolicCylinder((0.0, 0.0), 0.5, 1.0), P, nx=7, nt=2)
    assert rep.finite and np.isfinite(rep.space_jump)
