import numpy as np
import pytest

from diffeogeo.euler_arnold import InertiaOp, PeriodicField, grid
from diffeogeo.vanishing import (
    LevelResult,
    default_target,
    level_sizes,
    minimize_path,
    path_energy_lagrangian,
    run_level,
    straight_path,
    vanish_distance_experiment,
    wave_path,
)

M, N = 32, 16
Y = grid(M)
D = 0.5 * (1 - np.cos(Y)) / 2


def test_rotation_path_has_length_of_shift():
    # uniform velocity c: G = c^2 for every s, so L = c and E = c^2 / 2
    for s in (0, 1):
        P = straight_path(Y, np.full(M, 0.3), N)
        E, L, g, bmin = path_energy_lagrangian(P, 1.0 / N, s)
        assert L == pytest.approx(0.3, rel=1e-12)
        assert E == pytest.approx(0.045, rel=1e-12)
        assert bmin == pytest.approx(2 * np.pi / M)


@pytest.mark.parametrize("s", [0, 1])
def test_energy_gradient_matches_central_difference(s, rng):
    P = straight_path(Y, D, N) + 0.01 * rng.normal(size=(N + 1, M)) * np.r_[0, np.ones(N - 1), 0][:, None]
    dt = 1.0 / N
    _, _, g, _ = path_energy_lagrangian(P, dt, s)
    h = 1e-6
    for idx in [(1, 0), (3, 7), (N - 1, M - 1), (8, 15)]:
        e = np.zeros_like(P)
        e[idx] = h
        fd = (path_energy_lagrangian(P + e, dt, s)[0] - path_energy_lagrangian(P - e, dt, s)[0]) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-5, abs=1e-10)
    assert np.all(g[0] == 0) and np.all(g[-1] == 0)


def test_seed_paths_hit_endpoints():
    for P in [straight_path(Y, D, N), wave_path(Y, D, N, 100.0)]:
        np.testing.assert_allclose(P[0], Y, atol=1e-15)
        np.testing.assert_allclose(P[-1], Y + D, atol=1e-12)
        assert np.all(np.diff(P, axis=1) > 0)


def test_minimize_lowers_energy():
    P0 = wave_path(Y, D, N, 10.0)
    E0 = path_energy_lagrangian(P0, 1.0 / N, 1)[0]
    P, E, L, it, _ = minimize_path(P0, 1.0 / N, 1, iters=10)
    assert E < E0 and it <= 10
    np.testing.assert_array_equal(P[-1], P0[-1])
    assert L <= np.sqrt(2 * E) + 1e-12


def test_level_sizes():
    assert level_sizes(1) == (64, 64)
    assert level_sizes(3) == (1024, 256)


def test_zero_target_gives_zero_length():
    res = vanish_distance_experiment(1, target=PeriodicField(np.zeros(16)), levels=2, iters=3)
    assert [r.length for r in res] == [0.0, 0.0]
    assert all(r.converged for r in res)


def test_single_level_runs():
    res = run_level(0, default_target(0.5), 1, iters=5)
    assert isinstance(res, LevelResult)
    assert res.length <= res.start_length and res.iterations <= 5
    assert set(res.to_dict()) >= {"level", "M", "n", "length", "start", "converged"}


def test_rejects_unsupported_orders_and_targets():
    with pytest.raises(ValueError):
        vanish_distance_experiment(2, levels=1)
    with pytest.raises(ValueError):
        vanish_distance_experiment(InertiaOp(0.5, 64), levels=1)
    with pytest.raises(ValueError):
        vanish_distance_experiment(0, target=default_target(2.5), levels=1)
