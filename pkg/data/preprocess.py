import numpy as np

from utils.errors import DomainError, ShapeError


def as_grid_function(values, grid, name="f"):
    values = np.asarray(values, dtype=float)
    if values.ndim == 0:
        values = np.full(grid.size, float(values))
    if values.shape != (grid.size,):
        raise ShapeError(f"{name} has {values.size} values for a grid of {grid.size} nodes")
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{name} must be finite at every node")
    return values


def require_positive(values, name="phi"):
    if np.any(values <= 0):
        i = int(np.argmax(values <= 0))
        raise DomainError(f"{name} must be strictly positive, got {values[i]:g} at node {i}")
    return values


def random_positive_function(size, rng, low=0.5, high=2.0):
    return rng.uniform(low, high, size=size)


def restrict_to(values, mask):
    # zera fora da região (truncamento f * 1_Sigma)
    return np.where(mask, values, 0.0)
