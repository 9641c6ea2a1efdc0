import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import diffeogeo.landmarks as lm
from diffeogeo.kernels import KernelSpec, kernel_eval
from diffeogeo.landmarks import (
    GeodesicPath,
    LandmarkState,
    cometric,
    energy,
    flat,
    geodesic_accel,
    hamiltonian_rhs,
    horizontal_lift,
    metric,
    sharp,
    shoot,
    shoot_adaptive,
    shoot_vector_form,
)

G1 = KernelSpec("gaussian", 1.0)


def spread_points(rng, N, n, scale=1.5, min_sep=0.3):
    while True:
        q = rng.normal(size=(N, n)) * scale
        d = np.linalg.norm(q[:, None] - q[None], axis=-1) + np.eye(N) * 10
        if d.min() > min_sep:
            return q


# ---------------------------------------------------------------- metric and cometric


def test_metric_single_landmark():
    k = KernelSpec("matern_5_2", 2.0)
    P, Q = np.array([[1.0, 2.0]]), np.array([[3.0, -1.0]])
    assert metric(k, [[0.4, 0.1]], P, Q) == pytest.approx(1.0 / kernel_eval(k, np.zeros(2)))


def test_metric_positive(rng):
    q = spread_points(rng, 4, 2)
    for _ in range(10):
        P = rng.normal(size=(4, 2))
        assert metric(G1, q, P, P) > 0


def test_metric_equals_cometric_of_flats(rng):
    q = spread_points(rng, 5, 2)
    P, Q = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
    assert metric(G1, q, P, Q) == pytest.approx(cometric(G1, q, flat(G1, q, P), flat(G1, q, Q)), abs=1e-10)


def test_cometric_cases():
    a = np.array([[1.5, -2.0]])
    assert cometric(G1, [[0.0, 0.0]], a, a) == pytest.approx(6.25)
    q = np.array([[0.0], [1.0]])
    assert cometric(G1, q, [[1.0], [0.0]], [[0.0], [1.0]]) == pytest.approx(np.exp(-0.5), abs=1e-16)


def test_cometric_bilinear(rng):
    q = spread_points(rng, 3, 2)
    a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    assert cometric(G1, q, 2.0 * a, b) == 2.0 * cometric(G1, q, a, b)


# ---------------------------------------------------------------- sharp, flat, lift


def test_sharp_single_landmark():
    a = np.array([[0.3, 0.7]])
    np.testing.assert_array_equal(sharp(G1, [[1.0, 1.0]], a), a)


def test_sharp_pairs_with_metric(rng):
    q = spread_points(rng, 4, 2)
    a, P = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
    assert metric(G1, q, sharp(G1, q, a), P) == pytest.approx(np.sum(a * P), abs=1e-10)
    assert cometric(G1, q, a, a) == pytest.approx(metric(G1, q, sharp(G1, q, a), sharp(G1, q, a)), abs=1e-10)


@given(
    a=arrays(np.float64, (4, 2), elements=st.floats(-5, 5)),
    family=st.sampled_from(["gaussian", "matern_3_2", "matern_5_2"]),
)
def test_sharp_flat_inverse(a, family):
    q = np.array([[0.0, 0.0], [1.2, 0.3], [-0.4, 1.5], [2.0, -1.0]])
    k = KernelSpec(family, 1.0)
    np.testing.assert_allclose(flat(k, q, sharp(k, q, a)), a, atol=1e-10)
    np.testing.assert_allclose(sharp(k, q, flat(k, q, a)), a, atol=1e-10)


def test_horizontal_lift_reproduces_landmark_velocities(rng):
    q = spread_points(rng, 5, 2)
    P = rng.normal(size=(5, 2))
    np.testing.assert_allclose(horizontal_lift(G1, q, P, q), P, atol=1e-10)
    np.testing.assert_allclose(horizontal_lift(G1, q, P, q[2]), P[2], atol=1e-10)


def test_horizontal_lift_single_landmark():
    k = KernelSpec("gaussian", 0.8)
    x = np.array([[0.5, 0.0], [2.0, 1.0]])
    P = np.array([[1.0, -1.0]])
    expected = kernel_eval(k, x - [0.1, 0.2])[:, None] * P
    np.testing.assert_allclose(horizontal_lift(k, [[0.1, 0.2]], P, x), expected)


def test_lift_energy_matches_metric_by_quadrature():
    # The RKHS energy of the lift, int |F[P^hor]|^2 / F[K] dxi / 2pi, computed by FFT
    # quadrature on a wide grid, equals metric(q, P, P) = P^2 / K(0).
    k = KernelSpec("matern_3_2", 1.0)
    M, half = 2**14, 80.0
    x = np.linspace(-half, half, M, endpoint=False)
    q, P = np.array([[0.0]]), np.array([[1.7]])
    lift = horizontal_lift(k, q, P, x[:, None])[:, 0]
    Khat = np.real(np.fft.fft(np.fft.ifftshift(kernel_eval(k, x[:, None]))))
    Phat = np.fft.fft(np.fft.ifftshift(lift))
    energy_quad = np.sum(np.abs(Phat) ** 2 / Khat) / M
    assert energy_quad == pytest.approx(metric(k, q, P, P), rel=1e-8)


# ---------------------------------------------------------------- energy and Hamiltonian flow


def test_energy_cases(rng):
    q = spread_points(rng, 3, 2)
    assert energy(G1, q, np.zeros((3, 2))) == 0
    assert energy(G1, [[0.0, 0.0]], [[3.0, 4.0]]) == 12.5
    a = rng.normal(size=(3, 2))
    assert energy(G1, q, a) == 0.5 * cometric(G1, q, a, a)


def test_hamiltonian_single_landmark():
    dq, da = hamiltonian_rhs(G1, np.array([[1.0, 2.0]]), np.array([[0.5, -0.5]]))
    np.testing.assert_array_equal(dq, [[0.5, -0.5]])
    np.testing.assert_array_equal(da, [[0.0, 0.0]])


@pytest.mark.parametrize("family", ["gaussian", "matern_3_2", "matern_5_2"])
def test_hamiltonian_is_symplectic_gradient(family, rng):
    k = KernelSpec(family, 1.2)
    q = spread_points(rng, 4, 2)
    a = rng.normal(size=(4, 2))
    dq, da = hamiltonian_rhs(k, q, a)
    h = 1e-6
    dEdq = np.zeros_like(q)
    dEda = np.zeros_like(a)
    for idx in np.ndindex(q.shape):
        e = np.zeros_like(q)
        e[idx] = h
        dEdq[idx] = (energy(k, q + e, a) - energy(k, q - e, a)) / (2 * h)
        dEda[idx] = (energy(k, q, a + e) - energy(k, q, a - e)) / (2 * h)
    np.testing.assert_allclose(dq, dEda, atol=1e-6)
    np.testing.assert_allclose(da, -dEdq, atol=1e-6)
    np.testing.assert_allclose(dq, sharp(k, q, a), atol=1e-14)


def test_momentum_rate_sums_to_zero(rng):
    q = spread_points(rng, 6, 3)
    _, da = hamiltonian_rhs(G1, q, rng.normal(size=(6, 3)))
    assert np.abs(da.sum(axis=0)).max() < 1e-14


def test_geodesic_accel_trivial_cases(rng):
    np.testing.assert_array_equal(geodesic_accel(G1, [[0.0, 0.0]], [[1.0, 2.0]]), 0)
    q = spread_points(rng, 3, 2)
    np.testing.assert_array_equal(geodesic_accel(G1, q, np.zeros((3, 2))), 0)


def test_geodesic_accel_matches_hamiltonian_derivative(rng):
    # d/dt (K(q) alpha) along the Hamiltonian flow equals the vector-form acceleration
    q = spread_points(rng, 4, 2)
    a = rng.normal(size=(4, 2))
    qdot = sharp(G1, q, a)
    dq, da = hamiltonian_rhs(G1, q, a)
    h = 1e-6
    qdd = (sharp(G1, q + h * dq, a + h * da) - sharp(G1, q - h * dq, a - h * da)) / (2 * h)
    np.testing.assert_allclose(geodesic_accel(G1, q, qdot), qdd, atol=1e-7)


def test_vector_form_agrees_with_hamiltonian(rng):
    q = spread_points(rng, 3, 2)
    a = 0.5 * rng.normal(size=(3, 2))
    path = shoot(G1, (q, a), 1.0, 1e-3)
    _, qs, _ = shoot_vector_form(G1, q, sharp(G1, q, a), 1.0, 1e-3)
    assert np.abs(qs[-1] - path.q[-1]).max() < 1e-6


# ---------------------------------------------------------------- shooting


def test_shoot_single_landmark_straight_line():
    path = shoot(G1, (np.array([[0.5, -1.0]]), np.array([[1.0, 0.0]])), T=1.0, dt=1e-2)
    np.testing.assert_allclose(path.q[-1], [[1.5, -1.0]], atol=1e-13)
    assert len(path.times) == len(path.q) == len(path.energy_trace) == 101
    assert np.all(np.diff(path.times) > 0)


def test_shoot_energy_drift_against_adaptive_reference(rng):
    q = spread_points(rng, 5, 2)
    a = 0.5 * rng.normal(size=(5, 2))
    path = shoot(G1, (q, a), 1.0, 1e-3)
    assert path.max_energy_drift() < 1e-8
    ref = shoot_adaptive(G1, (q, a), 1.0, 1e-1)
    assert np.abs(ref.q[-1] - path.q[-1]).max() < 1e-8


def test_head_on_landmarks_never_cross():
    q0 = np.array([[-1.0], [1.0]])
    a0 = np.array([[2.0], [-2.0]])
    path = shoot(G1, (q0, a0), T=3.0, dt=1e-3)
    assert path.error is None
    assert np.all(path.q[:, 0, 0] < path.q[:, 1, 0])
    ref = shoot_adaptive(G1, (q0, a0), 3.0, 1e-1)
    assert np.abs(ref.q[-1] - path.q[-1]).max() < 1e-6


def test_collision_truncates_path(monkeypatch):
    # a separation floor above the closest approach forces the collision branch
    monkeypatch.setattr(lm, "MIN_SEPARATION", 1.5)
    path = shoot(G1, (np.array([[-1.0], [1.0]]), np.array([[2.0], [-2.0]])), T=3.0, dt=1e-2)
    assert path.error == "DegenerateConfig"
    assert len(path.times) < 301
    assert np.abs(path.q[-1, 0, 0] - path.q[-1, 1, 0]) >= 1.5


def test_momentum_conserved_along_path(rng):
    q = spread_points(rng, 6, 2)
    a = 0.5 * rng.normal(size=(6, 2))
    path = shoot(G1, (q, a), 2.0, 1e-3)
    assert np.abs(path.alpha.sum(axis=1) - a.sum(axis=0)).max() < 1e-10
    assert path.max_energy_drift() < 1e-6


def test_time_reversal(rng):
    q = spread_points(rng, 4, 2)
    a = 0.5 * rng.normal(size=(4, 2))
    fwd = shoot(G1, (q, a), 1.0, 1e-3)
    back = shoot(G1, (fwd.q[-1], -fwd.alpha[-1]), 1.0, 1e-3)
    assert np.abs(back.q[-1] - q).max() < 1e-6


def test_midpoint_integrator(rng):
    q = spread_points(rng, 4, 2)
    a = 0.5 * rng.normal(size=(4, 2))
    mid = shoot(G1, (q, a), 1.0, 1e-2, integrator="midpoint")
    rk = shoot(G1, (q, a), 1.0, 1e-3)
    assert mid.integrator == "midpoint"
    assert mid.max_energy_drift() < 1e-5
    assert np.abs(mid.q[-1] - rk.q[-1]).max() < 1e-3


def test_shoot_rejects_bad_arguments():
    with pytest.raises(ValueError):
        shoot(G1, ([[0.0]], [[1.0]]), T=1.0, dt=0.0)
    with pytest.raises(ValueError):
        shoot(G1, ([[0.0]], [[1.0]]), integrator="euler")


# ---------------------------------------------------------------- serialization


def test_csv_and_json(rng):
    q = spread_points(rng, 2, 2)
    path = shoot(G1, (q, rng.normal(size=(2, 2))), 0.1, 1e-2)
    text = path.to_csv()
    header = text.splitlines()[0].split(",")
    assert header == ["t", "q_1_1", "q_1_2", "q_2_1", "q_2_2", "alpha_1_1", "alpha_1_2", "alpha_2_1", "alpha_2_2", "energy"]
    rows = np.loadtxt(text.splitlines()[1:], delimiter=",")
    np.testing.assert_array_equal(rows[:, 0], path.times)
    np.testing.assert_array_equal(rows[-1, 1:5], path.q[-1].ravel())
    again = GeodesicPath.from_dict(json.loads(path.to_json()))
    np.testing.assert_array_equal(again.q, path.q)
    assert again.kernel == {"family": "gaussian", "sigma": 1.0}


def test_state_validation():
    s = LandmarkState([[0.0, 1.0], [2.0, 3.0]], [0.0, 1.0, 2.0, 3.0])
    assert s.N == 2 and s.dim == 2 and s.alpha.shape == (2, 2)
    with pytest.raises(ValueError):
        LandmarkState([[0.0, 1.0]], [1.0, 2.0, 3.0])
