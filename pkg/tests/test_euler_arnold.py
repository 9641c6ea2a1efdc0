import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffeogeo.euler_arnold import (
    InertiaOp,
    PeriodicField,
    ad_star,
    ad_transpose,
    arnold_numerator_id,
    bracket,
    dealiased_product,
    derivative,
    ea_evolve,
    ea_flow,
    ea_rhs,
    eulerian_velocities,
    grid,
    inertia_apply,
    inertia_invert,
    metric_at_id,
    norm_sq,
    path_energy,
    rho,
    sectional_curvature_id,
    sectional_numerator_id,
    tail_fraction,
    trig_interpolate,
)
from diffeogeo.exceptions import BlowUp, OrderTooLow

M = 64
X = grid(M)


def low_mode(rng, K=4):
    u = np.zeros(M)
    for k in range(1, K + 1):
        u += rng.normal() * np.cos(k * X) + rng.normal() * np.sin(k * X)
    return u


seeds = st.integers(0, 2**32 - 1)


# ---------------------------------------------------------------- fields and operators


def test_field_validation_and_coefficients():
    f = PeriodicField.from_function(lambda x: 1 + np.cos(3 * x), 16)
    c = f.coefficients()
    assert c[0] == pytest.approx(1.0) and c[3] == pytest.approx(0.5) and c[-3] == pytest.approx(0.5)
    np.testing.assert_allclose(PeriodicField.from_coefficients(c).samples, f.samples, atol=1e-15)
    d = json.loads(f.to_json())
    assert d["M"] == 16 and len(d["coefficients"]["re"]) == 16
    with pytest.raises(ValueError):
        PeriodicField(np.zeros(12))
    with pytest.raises(ValueError):
        InertiaOp(1.0, 48)
    with pytest.raises(ValueError):
        InertiaOp(-1.0, 64)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 2.0])
def test_inertia_on_modes(s):
    op = InertiaOp(s, M)
    np.testing.assert_allclose(inertia_apply(op, np.cos(3 * X)), 10.0**s * np.cos(3 * X), atol=1e-10)
    np.testing.assert_allclose(inertia_apply(op, np.ones(M)), np.ones(M), atol=1e-14)


@given(seed=seeds)
def test_inertia_invert_is_inverse(seed):
    u = low_mode(np.random.default_rng(seed), 8)
    op = InertiaOp(1.5, M)
    np.testing.assert_allclose(inertia_invert(op, inertia_apply(op, u)), u, atol=1e-12)


def test_derivative_and_product():
    np.testing.assert_allclose(derivative(np.sin(2 * X)), 2 * np.cos(2 * X), atol=1e-13)
    np.testing.assert_allclose(derivative(np.sin(2 * X), 2), -4 * np.sin(2 * X), atol=1e-12)
    assert np.abs(derivative(np.cos(M // 2 * X))).max() < 1e-12
    np.testing.assert_allclose(dealiased_product(np.cos(X), np.cos(X)), 0.5 + 0.5 * np.cos(2 * X), atol=1e-14)
    # products landing above the resolved band are dropped, not aliased
    high = np.cos(20 * X)
    np.testing.assert_allclose(dealiased_product(high, high), 0.5, atol=1e-14)


def test_metric_values():
    for s in (0.0, 1.0, 2.0):
        op = InertiaOp(s, M)
        assert metric_at_id(op, np.cos(X), np.cos(X)) == pytest.approx(0.5 * 2.0**s)
        assert abs(metric_at_id(op, np.cos(X), np.sin(X))) < 1e-15
        assert norm_sq(op, np.ones(M)) == pytest.approx(1.0)


# ---------------------------------------------------------------- algebra


def test_ad_star_is_dual_of_bracket(rng):
    # <ad*_X m, Y> = <m, [X, Y]> with <a, b> = mean(a b)
    Xf, Y, m = low_mode(rng), low_mode(rng), low_mode(rng)
    assert np.mean(ad_star(Xf, m) * Y) == pytest.approx(np.mean(m * bracket(Xf, Y)), abs=1e-12)


def test_bracket_sign_and_jacobi(rng):
    np.testing.assert_allclose(bracket(np.cos(X), np.sin(X)), -np.ones(M), atol=1e-14)
    A, B, C = low_mode(rng), low_mode(rng), low_mode(rng)
    np.testing.assert_allclose(bracket(A, B), -bracket(B, A), atol=1e-12)
    jac = bracket(A, bracket(B, C)) + bracket(B, bracket(C, A)) + bracket(C, bracket(A, B))
    assert np.abs(jac).max() < 1e-10


@pytest.mark.parametrize("s", [1.0, 2.0])
def test_ad_transpose(s, rng):
    op = InertiaOp(s, M)
    A, B, C = low_mode(rng), low_mode(rng), low_mode(rng)
    lhs = metric_at_id(op, ad_transpose(op, A, B), C)
    assert lhs == pytest.approx(metric_at_id(op, B, bracket(A, C)), rel=1e-10)


def test_rho_pairing_and_cyclic_sum(rng):
    op = InertiaOp(1.0, M)
    A, B, C = low_mode(rng), low_mode(rng), low_mode(rng)

    def g(a, b):
        return metric_at_id(op, a, b)

    np.testing.assert_allclose(rho(op, A, B), rho(op, B, A), atol=1e-12)
    pairing = g(rho(op, A, B), C) - 0.5 * g(A, bracket(B, C)) - 0.5 * g(B, bracket(A, C))
    assert abs(pairing) < 1e-10
    cyc = g(rho(op, A, B), C) + g(rho(op, B, C), A) + g(rho(op, C, A), B)
    assert abs(cyc) < 1e-10


def test_rhs_special_cases(rng):
    u = low_mode(rng)
    # L^2 metric: inviscid Burgers-type u_t = -3 u u_x
    np.testing.assert_allclose(ea_rhs(InertiaOp(0.0, M), u), -3 * u * derivative(u), atol=1e-11)
    # H^1 metric: Camassa-Holm m_t = -(u m_x + 2 u_x m), m = u - u_xx
    op = InertiaOp(1.0, M)
    m = u - derivative(u, 2)
    mt = -(u * derivative(m) + 2 * derivative(u) * m)
    np.testing.assert_allclose(inertia_apply(op, ea_rhs(op, u)), mt, atol=1e-10)
    np.testing.assert_allclose(ea_rhs(op, np.full(M, 0.4)), 0, atol=1e-14)


# ---------------------------------------------------------------- curvature


@given(seed=seeds, s=st.sampled_from([1.0, 2.0]))
def test_two_numerator_forms_agree(seed, s):
    rng = np.random.default_rng(seed)
    op = InertiaOp(s, M)
    A, B = low_mode(rng), low_mode(rng)
    a, b = sectional_numerator_id(op, A, B), arnold_numerator_id(op, A, B)
    assert a == pytest.approx(b, rel=1e-8, abs=1e-8)


def test_numerator_symmetries(rng):
    op = InertiaOp(1.0, M)
    A, B = low_mode(rng), low_mode(rng)
    r = sectional_numerator_id(op, A, B)
    assert sectional_numerator_id(op, B, A) == pytest.approx(r, rel=1e-10)
    assert sectional_numerator_id(op, 2 * A, B) == pytest.approx(4 * r, rel=1e-10)
    assert abs(sectional_numerator_id(op, A, -1.5 * A)) < 1e-10
    assert sectional_curvature_id(op, A, 2 * A) is None


def test_curvature_needs_order_one():
    for s in (0.0, 0.5):
        with pytest.raises(OrderTooLow) as info:
            sectional_numerator_id(InertiaOp(s, M), np.cos(X), np.sin(X))
        assert info.value.code == "OrderTooLow"
        with pytest.raises(OrderTooLow):
            arnold_numerator_id(InertiaOp(s, M), np.cos(X), np.sin(X))


def test_curvature_sign_convention():
    # sectional curvature is minus the numerator over the squared area
    op = InertiaOp(1.0, M)
    A, B = np.cos(X), np.sin(2 * X)
    area = norm_sq(op, A) * norm_sq(op, B) - metric_at_id(op, A, B) ** 2
    assert sectional_curvature_id(op, A, B) == pytest.approx(-sectional_numerator_id(op, A, B) / area)


# ---------------------------------------------------------------- evolution


def test_evolve_conserves_energy_and_mean_momentum():
    op = InertiaOp(1.0, 128)
    x = grid(128)
    traj = ea_evolve(op, 0.5 * np.cos(x) + 0.25 * np.sin(2 * x), 0.5, 1e-3, save_every=50)
    assert traj.max_energy_drift() < 1e-10
    assert np.ptp(traj.momentum_mean) < 1e-12
    assert len(traj.times) == 11
    d = traj.to_spectral_dict()
    assert d["s"] == 1.0 and len(d["coefficients"]["re"]) == 11


def test_constant_velocity_is_rotation():
    op = InertiaOp(1.0, M)
    times, u, phi = ea_flow(op, np.full(M, 0.3), 1.0, 0.05)
    np.testing.assert_allclose(u[-1], 0.3, atol=1e-14)
    np.testing.assert_allclose(phi[-1], X + 0.3, atol=1e-13)
    assert times[-1] == 1.0


def test_camassa_holm_breaking_is_reported():
    op = InertiaOp(1.0, 256)
    x = grid(256)
    with pytest.raises(BlowUp) as info:
        ea_evolve(op, np.cos(x) + 0.5 * np.sin(2 * x), 1.0, 1e-3)
    assert 0.5 < info.value.details["t"] < 1.0
    assert info.value.partial.times[-1] < info.value.details["t"]


def test_unresolved_initial_data_rejected(rng):
    op = InertiaOp(1.0, M)
    with pytest.raises(ValueError):
        ea_evolve(op, rng.normal(size=M), 0.1, 1e-2)
    assert tail_fraction(np.cos(X)) < 1e-30


def test_trig_interpolate_exact_on_modes():
    pts = np.array([0.1, 1.7, 4.0])
    np.testing.assert_allclose(trig_interpolate(np.sin(3 * X), pts), np.sin(3 * pts), atol=1e-13)


def test_geodesic_is_stationary_for_path_energy():
    # first variation of the discrete energy vanishes along a computed geodesic
    # (relative to the second variation), and does not along a perturbed path
    op = InertiaOp(1.0, M)
    times, u, phi = ea_flow(op, 0.3 * np.cos(X) + 0.2 * np.sin(2 * X), 1.0, 1e-2)
    bump = np.sin(np.pi * times)[:, None]
    d = bump * (0.1 * np.sin(2 * phi) + 0.05 * np.cos(phi))

    def energy(path):
        us, dt = eulerian_velocities(path)
        return path_energy(op, us, dt)

    eps = 1e-3
    e0 = energy(phi)
    assert e0 == pytest.approx(0.5 * norm_sq(op, u[0]), rel=1e-4)
    first = (energy(phi + eps * d) - energy(phi - eps * d)) / (2 * eps)
    second = (energy(phi + eps * d) - 2 * e0 + energy(phi - eps * d)) / eps**2
    assert abs(first) < 1e-5 * second
    off = phi + 0.5 * d
    first_off = (energy(off + eps * d) - energy(off - eps * d)) / (2 * eps)
    assert abs(first_off) > 1e-2 * second
