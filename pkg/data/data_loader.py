"""CSV persistence of grids and kernels, and the bundled toy fixtures.

Both formats start with one metadata line ``N,kind,alpha``. Grids follow with a
pandas table (one row per node, weight column last); kernels follow with the
N x N entries in row-major order.
"""
import json
import logging
import os

import numpy as np
import pandas as pd

from data.discretization import KernelMatrix, KernelSpec, QuadratureGrid, kernel_from_matrix, weighted_grid
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def _metadata_line(N, kind, alpha):
    return f"{N},{kind},{'' if alpha is None else repr(float(alpha))}\n"


def _read_metadata(path):
    with open(path) as f:
        N, kind, alpha = f.readline().strip().split(",")
    return int(N), kind, (float(alpha) if alpha else None)


def grid_to_frame(grid):
    columns = {}
    if grid.kind == "sphere":
        for j in range(grid.xi.shape[1]):
            columns[f"re_xi{j + 1}"] = grid.xi[:, j].real
            columns[f"im_xi{j + 1}"] = grid.xi[:, j].imag
    elif grid.kind == "cylinder":
        for j in range(grid.z.shape[1]):
            columns[f"re_z{j + 1}"] = grid.z[:, j].real
            columns[f"im_z{j + 1}"] = grid.z[:, j].imag
        columns["t"] = grid.t
    columns["weight"] = grid.weights
    return pd.DataFrame(columns)


def save_grid_csv(grid, path, alpha=None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(_metadata_line(grid.size, grid.kind, alpha))
        grid_to_frame(grid).to_csv(f, index=False, float_format="%.17g")
    logger.info(f"Malha salva em {path} ({grid.size} nós)")
    return path


def load_grid_csv(path):
    N, kind, _ = _read_metadata(path)
    df = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    if len(df) != N:
        raise ShapeError(f"{path}: header announces {N} nodes, found {len(df)}")

    weights = df["weight"].to_numpy()
    if kind == "sphere":
        m = sum(1 for c in df.columns if c.startswith("re_xi"))
        xi = np.column_stack([df[f"re_xi{j}"] + 1j * df[f"im_xi{j}"] for j in range(1, m + 1)])
        return QuadratureGrid(kind="sphere", n=m - 1, weights=weights, xi=xi)
    if kind == "cylinder":
        m = sum(1 for c in df.columns if c.startswith("re_z"))
        z = np.column_stack([df[f"re_z{j}"] + 1j * df[f"im_z{j}"] for j in range(1, m + 1)])
        return QuadratureGrid(kind="cylinder", n=m, weights=weights, z=z, t=df["t"].to_numpy())
    if kind == "discrete":
        return weighted_grid(weights)
    raise DomainError(f"{path}: unknown grid kind {kind!r}")


def save_kernel_csv(kernel, path, alpha=None):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(_metadata_line(kernel.size, kernel.grid.kind, alpha))
        np.savetxt(f, kernel.entries, delimiter=",", fmt="%.17g")
    logger.info(f"Núcleo salvo em {path} ({kernel.size}x{kernel.size})")
    return path


def load_kernel_csv(path, grid, spec=None):
    N, kind, _ = _read_metadata(path)
    if N != grid.size:
        raise ShapeError(f"{path}: kernel of size {N} does not match grid of {grid.size} nodes")
    entries = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return KernelMatrix(entries, spec or KernelSpec(), grid)


def load_fixture(name):
    path = os.path.join(FIXTURE_DIR, f"{name}.json")
    if not os.path.exists(path):
        available = sorted(f[:-5] for f in os.listdir(FIXTURE_DIR) if f.endswith(".json"))
        raise DomainError(f"unknown fixture {name!r}; available: {available}")

    with open(path) as f:
        data = json.load(f)
    grid = weighted_grid(data["weights"])
    kernel = kernel_from_matrix(data["entries"], grid)
    logger.info(f"Fixture {name} carregada: {data.get('description', '')}")
    return kernel, data.get("p")
