import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.stats import linregress

from data.discretization import (
    KernelSpec,
    apply_kernel_blockwise,
    assemble_kernel,
    cylinder_grid,
    cylinder_shell_grid,
    cylinder_volume,
    grid_from_points,
    kernel_from_matrix,
    sphere_grid,
    weighted_grid,
)
from geometry.cr_sphere import SpherePoint
from geometry.heisenberg import HPoint
from geometry.numerics_core import make_params
from utils.errors import DomainError, KernelAssemblyError, ShapeError


@pytest.fixture(scope="module")
def params():
    return make_params(1, 2)


@pytest.fixture(scope="module")
def small_sphere():
    return sphere_grid((6, 6, 6))


def test_sphere_grid_volume():
    grid = sphere_grid((4, 4, 4))
    # quatro anéis de 2 colunas com 4 nós na fibra
    assert grid.size == 32
    assert grid.total_weight == pytest.approx(16 * math.pi ** 2, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(grid.xi, axis=1), 1.0, atol=1e-14)
    assert np.all(grid.weights > 0)


@pytest.mark.parametrize("resolution", [(4, 6, 6), (8, 32, 32), (12, 20, 28)])
def test_sphere_grid_is_balanced(resolution):
    grid = sphere_grid(resolution)
    assert grid.total_weight == pytest.approx(16 * math.pi ** 2, rel=1e-12)
    np.testing.assert_allclose(grid.weights @ grid.xi, 0.0, atol=1e-12)


def test_sphere_nodes_are_well_separated():
    grid = sphere_grid((8, 32, 32))
    h = math.pi / 16
    gaps = pdist(np.column_stack([grid.xi.real, grid.xi.imag]))
    assert gaps.min() > 0.5 * h


@pytest.fixture(scope="module")
def sphere_row_sums(params):
    """Sampled row sums of the pure kernel against f = 1 with m_theta = 8, 16, 32 and isotropic cells."""
    sums = {}
    for m in (8, 16, 32):
        grid = sphere_grid((m, 4 * m, 4 * m))
        rows = np.unique(np.linspace(0, grid.size - 1, 512).astype(int))
        sums[m] = apply_kernel_blockwise(grid, KernelSpec(), params, np.ones(grid.size),
                                         rows=rows, threads=4, block_size=16)
    return sums


def test_sphere_row_sums_converge_from_below(sphere_row_sums):
    deficits = np.array([1.0 - np.mean(sphere_row_sums[m]) / (32 * math.pi) for m in (8, 16, 32)])
    assert np.all(deficits > 0)
    assert np.all(np.diff(deficits) < 0)
    fit = linregress(np.log([math.pi / (2 * m) for m in (8, 16, 32)]), np.log(deficits))
    assert 1.4 <= fit.slope <= 2.6


def test_sphere_row_sum_spread_shrinks(sphere_row_sums):
    spreads = [np.ptp(sphere_row_sums[m]) / np.max(sphere_row_sums[m]) for m in (8, 16, 32)]
    assert spreads[2] < spreads[0]
    assert spreads[2] <= 0.015


def test_sphere_row_sums_on_a_fine_grid(params):
    grid = sphere_grid((64, 256, 256))
    rows = np.linspace(0, grid.size - 1, 32).astype(int)
    sums = apply_kernel_blockwise(grid, KernelSpec(), params, np.ones(grid.size),
                                  rows=rows, threads=4, block_size=2)
    assert np.ptp(sums) / np.max(sums) <= 0.005
    assert np.mean(sums) == pytest.approx(32 * math.pi, rel=0.005)


@pytest.mark.parametrize("n, resolution", [(1, (6, 4, 6, 4)), (2, (6, 4, 6, 4))])
def test_cylinder_grid_volume(n, resolution):
    R = 1.7
    grid = cylinder_grid(R, resolution, n=n)
    assert grid.total_weight == pytest.approx(cylinder_volume(R, n), rel=1e-12)
    assert np.all(np.linalg.norm(grid.z, axis=1) < R)
    assert np.all(np.abs(grid.t) < R * R)


@pytest.mark.parametrize("n", [1, 2])
def test_graded_cylinder_grid(n):
    R, core = 5.0, 0.1
    grid = cylinder_grid(R, (8, 12, 8, 4), n=n, core=core)
    assert grid.total_weight == pytest.approx(cylinder_volume(R, n), rel=1e-12)
    assert grid.region == {"R": R, "core": core}
    radius = np.linalg.norm(grid.z, axis=1)
    assert np.all(radius < R) and np.all(np.abs(grid.t) < R * R)
    # o primeiro painel radial tem largura core*tan(pi/16)
    assert radius.min() < core * math.tan(math.pi / 16)
    assert np.abs(grid.t).min() < core * core * math.tan(math.pi / 16)


def test_graded_cylinder_is_scale_free_and_nested():
    a = cylinder_grid(5.0, (8, 12, 8, 4), core=0.1)
    b = cylinder_grid(50.0, (8, 12, 8, 4), core=1.0)
    assert a.size == b.size
    np.testing.assert_allclose(b.weights, a.weights * 10.0 ** 4, rtol=1e-10)
    # um R maior só acrescenta painéis externos: os nós perto da origem se mantêm
    small = cylinder_grid(2.0, (8, 12, 8, 4), core=1.0)
    big = cylinder_grid(8.0, (8, 12, 8, 4), core=1.0)
    inner_small, inner_big = (np.unique(np.round(np.linalg.norm(g.z, axis=1), 12)) for g in (small, big))
    np.testing.assert_allclose(inner_small[inner_small < 1.0], inner_big[inner_big < 1.0], rtol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_shell_grid_volume(n):
    grid = cylinder_shell_grid(1.0, 16.0, (4, 4, 4, 4), n=n)
    expected = cylinder_volume(16.0, n) - cylinder_volume(1.0, n)
    assert grid.total_weight == pytest.approx(expected, rel=1e-12)
    outside = (np.linalg.norm(grid.z, axis=1) > 1.0) | (np.abs(grid.t) > 1.0)
    assert np.all(outside)


def test_invalid_grids():
    with pytest.raises(DomainError):
        sphere_grid((3, 8, 8))
    with pytest.raises(DomainError):
        sphere_grid((8, 8, 8), n=2)
    with pytest.raises(DomainError):
        cylinder_grid(0.0, (4, 4, 4, 4))
    with pytest.raises(DomainError):
        cylinder_grid(1.0, (4, 4, 4))
    with pytest.raises(DomainError):
        cylinder_grid(1.0, (4, 4, 4, 4), core=0.0)
    with pytest.raises(DomainError):
        cylinder_shell_grid(2.0, 1.0, (4, 4, 4, 4))
    with pytest.raises(DomainError):
        weighted_grid([1.0, -1.0])


def test_pure_kernel_on_sphere(small_sphere, params):
    K = assemble_kernel(small_sphere, KernelSpec(), params)
    assert np.all(np.diag(K.entries) == 0.0)
    np.testing.assert_allclose(K.entries, K.entries.T, rtol=1e-12)
    rho = small_sphere.distance_block(slice(0, 1))[0]
    assert K.entries[0, 5] == pytest.approx(rho[5] ** -2.0, rel=1e-12)


def test_green_model_without_mass_is_the_pure_kernel(small_sphere, params):
    pure = assemble_kernel(small_sphere, KernelSpec(), params)
    green = assemble_kernel(small_sphere, KernelSpec("green_model", mass=0.0, c_w=0.0), params)
    np.testing.assert_allclose(green.entries, pure.entries, rtol=1e-14)


def test_green_model_dominates_pure_kernel(small_sphere, params):
    pure = assemble_kernel(small_sphere, KernelSpec(), params)
    green = assemble_kernel(small_sphere, KernelSpec("green_model", mass=1.0, c_w=0.5), params)
    off = ~np.eye(small_sphere.size, dtype=bool)
    assert np.all(green.entries[off] > pure.entries[off])


def test_per_node_mass(small_sphere, params):
    mass = np.linspace(0.0, 1.0, small_sphere.size)
    K = assemble_kernel(small_sphere, KernelSpec("green_model", mass=mass), params)
    rho = small_sphere.distance_block(slice(3, 4))[0]
    assert K.entries[3, 7] == pytest.approx(rho[7] ** -2.0 + mass[3], rel=1e-12)
    with pytest.raises(ShapeError):
        assemble_kernel(small_sphere, KernelSpec("green_model", mass=np.ones(3)), params)


def test_nonpositive_green_base_reports_the_pair(small_sphere, params):
    with pytest.raises(KernelAssemblyError) as info:
        assemble_kernel(small_sphere, KernelSpec("green_model", mass=-1e6), params)
    i, j = info.value.pair
    assert i != j


def test_coincident_nodes_are_rejected(params):
    u = HPoint([0.5], 0.1)
    grid = grid_from_points([u, HPoint([0.0], 0.0), u], [1.0, 1.0, 1.0])
    with pytest.raises(KernelAssemblyError) as info:
        assemble_kernel(grid, KernelSpec(), params)
    assert info.value.pair in ((0, 2), (2, 0))


def test_kernel_spec_validation():
    with pytest.raises(DomainError):
        KernelSpec("riesz")
    with pytest.raises(DomainError):
        KernelSpec("pure_singular", mass=1.0)
    with pytest.raises(DomainError):
        KernelSpec("green_model", c_w=-1.0)


def test_discrete_grid_needs_explicit_kernel(params):
    grid = weighted_grid([1.0, 1.0])
    with pytest.raises(DomainError):
        assemble_kernel(grid, KernelSpec(), params)
    K = kernel_from_matrix([[0.0, 1.0], [1.0, 0.0]], grid)
    np.testing.assert_allclose(K.action([1.0, 2.0]), [2.0, 1.0])
    with pytest.raises(ShapeError):
        kernel_from_matrix(np.ones((3, 3)), grid)


def test_kernel_entries_are_read_only(small_sphere, params):
    K = assemble_kernel(small_sphere, KernelSpec(), params)
    with pytest.raises(ValueError):
        K.entries[0, 1] = 1.0


@pytest.mark.parametrize("threads", [1, 3])
def test_blockwise_action_matches_dense(params, threads):
    grid = cylinder_grid(1.0, (4, 4, 6, 4))
    spec = KernelSpec("green_model", mass=0.3, c_w=0.1)
    K = assemble_kernel(grid, spec, params, threads=threads, block_size=17)
    f = np.random.default_rng(0).uniform(0.5, 2.0, grid.size)

    direct = apply_kernel_blockwise(grid, spec, params, f, threads=threads, block_size=17)
    transposed = apply_kernel_blockwise(grid, spec, params, f, transpose=True, threads=threads, block_size=17)
    np.testing.assert_allclose(direct, K.action(f), rtol=1e-12)
    np.testing.assert_allclose(transposed, K.transpose_action(f), rtol=1e-12)


def test_sphere_points_grid(params):
    points = [SpherePoint([1.0, 0.0]), SpherePoint([0.0, 1.0]), SpherePoint([1.0, 1.0j])]
    grid = grid_from_points(points, [1.0, 2.0, 3.0])
    assert grid.kind == "sphere"
    K = assemble_kernel(grid, KernelSpec(), params)
    # |1 - xi . conj(eta)| = 1 para pontos ortogonais, logo rho^2 = 2 e K = 1/2
    assert K.entries[0, 1] == pytest.approx(0.5)


def test_blockwise_action_on_selected_rows(params):
    grid = sphere_grid((6, 12, 12))
    K = assemble_kernel(grid, KernelSpec(), params)
    f = np.random.default_rng(1).uniform(0.5, 2.0, grid.size)
    rows = np.array([grid.size - 1, 0, 17, 17, 40])
    picked = apply_kernel_blockwise(grid, KernelSpec(), params, f, rows=rows, block_size=2)
    np.testing.assert_allclose(picked, K.action(f)[rows], rtol=1e-12)
    with pytest.raises(DomainError):
        apply_kernel_blockwise(grid, KernelSpec(), params, f, rows=rows, transpose=True)
