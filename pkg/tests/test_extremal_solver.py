import itertools

import numpy as np
import pytest

from data.discretization import KernelSpec, assemble_kernel, kernel_from_matrix, sphere_grid, weighted_grid
from data.data_loader import load_fixture
from geometry.heisenberg import extremal_family_array
from geometry.numerics_core import make_params
from solvers.extremal_solver import (
    SubcriticalResult,
    blowup_diagnostic,
    continuation,
    distance_to_profile_band,
    el_defect,
    reference_profile,
    solve_subcritical,
)
from solvers.hls_functional import lp_norm, rayleigh_quotient
from utils.errors import ConvergenceError, DomainError


@pytest.fixture(scope="module")
def params():
    return make_params(1, 2)


@pytest.fixture(scope="module")
def sphere(params):
    grid = sphere_grid((4, 4, 4))
    return assemble_kernel(grid, KernelSpec(), params), grid


def random_instance(rng, size):
    entries = rng.uniform(0.5, 1.5, (size, size))
    entries = 0.5 * (entries + entries.T)
    np.fill_diagonal(entries, 0.0)
    grid = weighted_grid(rng.uniform(0.5, 1.5, size))
    return kernel_from_matrix(entries, grid), grid


def brute_force(K, grid, p, span=4.0, points=41, rounds=10):
    """Log-grid search over the positive p-sphere with x_0 = 1 fixed, zoomed around the best point."""
    size = grid.size
    w = grid.weights
    center = np.zeros(size - 1)
    half = span
    best_q, best_f = -np.inf, None
    for _ in range(rounds):
        axes = [np.linspace(c - half, c + half, points) for c in center]
        logs = np.array(list(itertools.product(*axes)))
        F = np.column_stack([np.ones(len(logs)), np.exp(logs)])
        Fw = F * w
        B = np.einsum("mi,ij,mj->m", Fw, K.entries, Fw)
        norms = np.sum(F ** p * w, axis=1) ** (1.0 / p)
        quotients = B / norms ** 2
        k = int(np.argmax(quotients))
        if quotients[k] > best_q:
            best_q = quotients[k]
            best_f = F[k] / norms[k]
        center = logs[k]
        half = max(half / 4.0, 1e-9)
        points = 21
    return best_q, best_f


def test_two_node_fixture_value():
    K, p = load_fixture("two_node")
    result = solve_subcritical(K, K.grid, p)
    assert result.converged
    assert result.D_estimate == pytest.approx(2.0 ** (-1.0 / 3.0), abs=1e-6)
    np.testing.assert_allclose(result.f, [2.0 ** (-2.0 / 3.0)] * 2, atol=1e-10)


def test_result_invariants(sphere, params):
    K, grid = sphere
    result = solve_subcritical(K, grid, 1.6, params=params)
    assert result.converged
    assert np.all(result.f >= 0)
    assert abs(lp_norm(result.f, grid, 1.6) - 1.0) <= 1e-10
    assert result.D_estimate == pytest.approx(rayleigh_quotient(K, result.f, 1.6), rel=1e-12)
    assert el_defect(K, result.f, result.D_estimate, 1.6) <= 1e-9 * (1 + result.D_estimate)
    assert result.to_dict()["D"] == result.D_estimate


def test_constant_kernel_closed_form():
    weights = np.array([0.4, 1.1, 2.0])
    c, p = 3.0, 1.7
    K = kernel_from_matrix(np.full((3, 3), c), weighted_grid(weights))
    init = np.random.default_rng(0).uniform(0.5, 2.0, 3)
    result = solve_subcritical(K, K.grid, p, init=init)
    V = weights.sum()
    assert result.converged
    assert result.D_estimate == pytest.approx(c * V ** (2 - 2 / p), rel=1e-9)
    np.testing.assert_allclose(result.f, V ** (-1 / p), rtol=1e-8)


def test_kernel_scaling(sphere, params):
    K, grid = sphere
    base = solve_subcritical(K, grid, 1.5, tol=1e-12, params=params)
    scaled = solve_subcritical(K.scaled(3.7), grid, 1.5, tol=1e-12, params=params)
    assert base.converged and scaled.converged
    assert scaled.D_estimate == pytest.approx(3.7 * base.D_estimate, rel=1e-9)
    np.testing.assert_allclose(scaled.f, base.f, atol=1e-10)


def test_quotient_never_decreases():
    rng = np.random.default_rng(21)
    for _ in range(50):
        size = int(rng.integers(3, 8))
        K, grid = random_instance(rng, size)
        init = rng.uniform(0.1, 3.0, size)
        result = solve_subcritical(K, grid, rng.uniform(1.2, 1.9), init=init, max_iter=300)
        history = np.array(result.history["quotient"])
        assert np.all(np.diff(history) >= -1e-12 * history[:-1])


def test_matches_brute_force_search():
    rng = np.random.default_rng(2024)
    for trial in range(25):
        size = 2 + trial % 3
        K, grid = random_instance(rng, size)
        p = rng.uniform(1.5, 1.9)
        result = solve_subcritical(K, grid, p)
        D_bf, f_bf = brute_force(K, grid, p)
        assert result.converged
        assert result.D_estimate == pytest.approx(D_bf, abs=1e-3)
        assert result.D_estimate >= D_bf - 1e-9
        assert np.max(np.abs(result.f - f_bf)) <= 1e-2


def test_kernel_domination_orders_the_maxima():
    rng = np.random.default_rng(5)
    for _ in range(10):
        K, grid = random_instance(rng, 5)
        bump = rng.uniform(0.0, 0.5, (5, 5))
        np.fill_diagonal(bump, 0.0)
        K_big = kernel_from_matrix(K.entries + bump, grid)
        small = solve_subcritical(K, grid, 1.6)
        big = solve_subcritical(K_big, grid, 1.6, init=small.f)
        assert big.D_estimate >= small.D_estimate


def test_subcritical_window(sphere, params):
    K, grid = sphere
    for p in (params.q_alpha, 1.3, 2.0, 2.5):
        with pytest.raises(DomainError):
            solve_subcritical(K, grid, p, params=params)
    two, _ = load_fixture("two_node")
    with pytest.raises(DomainError):
        solve_subcritical(two, two.grid, 1.0)


def test_degenerate_inputs():
    grid = weighted_grid([1.0, 1.0])
    with pytest.raises(DomainError):
        solve_subcritical(kernel_from_matrix(np.zeros((2, 2)), grid), grid, 1.5)
    K = kernel_from_matrix([[0.0, 1.0], [1.0, 0.0]], grid)
    with pytest.raises(DomainError):
        solve_subcritical(K, grid, 1.5, init=[1.0, 0.0])
    with pytest.raises(DomainError):
        solve_subcritical(K, grid, 1.5, init="random")


def test_non_convergence_is_data(sphere, params):
    K, grid = sphere
    init = np.random.default_rng(1).uniform(0.5, 2.0, grid.size)
    result = solve_subcritical(K, grid, 1.5, tol=1e-15, max_iter=1, init=init, params=params)
    assert not result.converged
    assert result.iterations == 1


def test_continuation_schedule_validation(sphere, params):
    K, grid = sphere
    with pytest.raises(DomainError):
        continuation(K, grid, [1.6, 1.7], params=params)
    with pytest.raises(DomainError):
        continuation(K, grid, [1.6, 1.6], params=params)
    with pytest.raises(DomainError):
        continuation(K, grid, [], params=params)
    with pytest.raises(DomainError):
        continuation(K, grid, [1.6, 1.3], params=params)


def test_single_stage_continuation_is_a_solve(sphere, params):
    K, grid = sphere
    [stage] = continuation(K, grid, [1.7], params=params)
    direct = solve_subcritical(K, grid, 1.7, params=params)
    assert stage.D_estimate == direct.D_estimate
    np.testing.assert_array_equal(stage.f, direct.f)


def test_warm_and_cold_start_agree(sphere, params):
    K, grid = sphere
    schedule = [1.8, 1.6, 1.45, 1.36, params.q_alpha + 1e-3]
    warm = continuation(K, grid, schedule, params=params)
    cold = continuation(K, grid, schedule, params=params, warm_start=False)
    assert len(warm) == len(schedule)
    assert [r.p for r in warm] == schedule
    assert warm[-1].D_estimate == pytest.approx(cold[-1].D_estimate, rel=1e-7)


def test_blowup_scale_from_the_maximum(params):
    grid = sphere_grid((4, 4, 4))
    f = np.ones(grid.size)
    f[10] = 16.0
    result = SubcriticalResult(p=1.5, D_estimate=1.0, f=f, iterations=1, residual=0.0, converged=True)
    report = blowup_diagnostic(result, grid, params)
    assert report.mu_p == pytest.approx(0.5, rel=1e-15)
    assert report.center_index == 10
    center_row = report.profile[report.profile["node"] == 10]
    assert center_row["g"].iloc[0] == 1.0
    assert center_row["radius"].iloc[0] == 0.0
    assert report.profile["radius"].max() <= 4.0


def test_flat_maximizer_has_no_blowup(params):
    grid = sphere_grid((4, 4, 4))
    c = 0.3
    result = SubcriticalResult(p=1.5, D_estimate=1.0, f=np.full(grid.size, c), iterations=1,
                               residual=0.0, converged=True)
    report = blowup_diagnostic(result, grid, params)
    assert report.center_index == 0
    assert report.mu_p == pytest.approx(c ** (-(2 - 1.5) / 2), rel=1e-14)
    assert np.all(report.profile["g"] == 1.0)
    # mu_p > 1 cobre a esfera inteira, e H decai longe do centro
    assert len(report.profile) == grid.size
    assert report.profile_deviation > 0.5


def test_blowup_needs_a_converged_result(params):
    grid = sphere_grid((4, 4, 4))
    result = SubcriticalResult(p=1.5, D_estimate=1.0, f=np.ones(grid.size), iterations=3,
                               residual=1.0, converged=False)
    with pytest.raises(ConvergenceError):
        blowup_diagnostic(result, grid, params)


def test_reference_profiles_bound_H_on_each_sphere(params):
    s = np.array([0.0, 0.5, 1.0, 2.0])
    horizontal = reference_profile(s, params)
    vertical = reference_profile(s, params, axis="vertical")
    np.testing.assert_allclose(horizontal, (1 + s ** 2) ** -3.0)
    np.testing.assert_allclose(vertical, (1 + s ** 4) ** -1.5)
    assert np.all(horizontal <= vertical)

    # H no raio de Heisenberg 1, entre o eixo horizontal e o vertical
    angle = np.linspace(0.0, np.pi / 2, 9)
    z = np.sqrt(np.cos(angle))[:, None].astype(complex)
    t = np.sin(angle)
    values = extremal_family_array(1.0, z, t, params)
    assert values[0] == pytest.approx(horizontal[2])
    assert values[-1] == pytest.approx(vertical[2])
    np.testing.assert_allclose(distance_to_profile_band(values, np.ones(9), params), 0.0, atol=1e-15)

    with pytest.raises(DomainError):
        reference_profile(s, params, axis="diagonal")


def test_distance_outside_the_profile_band(params):
    s = np.array([1.0, 1.0, 1.0])
    low, high = 2.0 ** -3.0, 2.0 ** -1.5
    g = np.array([low - 0.1, 0.5 * (low + high), high + 0.2])
    np.testing.assert_allclose(distance_to_profile_band(g, s, params), [0.1, 0.0, 0.2])
