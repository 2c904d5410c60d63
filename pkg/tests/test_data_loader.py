import numpy as np
import pytest

from data.data_loader import load_fixture, load_grid_csv, load_kernel_csv, save_grid_csv, save_kernel_csv
from data.discretization import KernelSpec, assemble_kernel, cylinder_grid, sphere_grid
from geometry.numerics_core import make_params
from utils.errors import DomainError, ShapeError


def test_sphere_grid_and_kernel_survive_csv(tmp_path):
    params = make_params(1, 2)
    grid = sphere_grid((4, 4, 4))
    K = assemble_kernel(grid, KernelSpec(), params)

    grid_path = save_grid_csv(grid, tmp_path / "grid.csv", alpha=2)
    kernel_path = save_kernel_csv(K, tmp_path / "kernel.csv", alpha=2)
    with open(kernel_path) as f:
        assert f.readline().strip() == "32,sphere,2.0"

    loaded = load_grid_csv(grid_path)
    np.testing.assert_array_equal(loaded.weights, grid.weights)
    np.testing.assert_array_equal(loaded.xi, grid.xi)
    loaded_K = load_kernel_csv(kernel_path, loaded)
    np.testing.assert_array_equal(loaded_K.entries, K.entries)


def test_cylinder_grid_columns(tmp_path):
    grid = cylinder_grid(1.0, (4, 4, 4, 4))
    path = save_grid_csv(grid, tmp_path / "cyl.csv")
    loaded = load_grid_csv(path)
    assert loaded.kind == "cylinder"
    np.testing.assert_array_equal(loaded.t, grid.t)
    np.testing.assert_array_equal(loaded.z, grid.z)


def test_kernel_size_mismatch(tmp_path):
    params = make_params(1, 2)
    K = assemble_kernel(sphere_grid((4, 4, 4)), KernelSpec(), params)
    path = save_kernel_csv(K, tmp_path / "k.csv")
    with pytest.raises(ShapeError):
        load_kernel_csv(path, sphere_grid((4, 4, 5)))


def test_two_node_fixture():
    K, p = load_fixture("two_node")
    assert p == 1.5
    np.testing.assert_array_equal(K.entries, [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(K.grid.weights, [1.0, 1.0])


def test_unknown_fixture():
    with pytest.raises(DomainError, match="two_node"):
        load_fixture("three_node")
