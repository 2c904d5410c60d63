"""Norms, the HLS bilinear form, Rayleigh quotients, Young's operator bound and tail integrals.

Every sum over nodes carries the quadrature weights: (Kf)_i = sum_j K_ij f_j w_j.
Scalar reductions use math.fsum so that the result does not depend on the
summation order.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from data.discretization import QuadratureGrid, apply_kernel_blockwise, cylinder_shell_grid
from data.preprocess import as_grid_function
from geometry.heisenberg import extremal_family_array
from geometry.numerics_core import extremal_norm_power, sharp_constant_DH
from utils.errors import DomainError, ShapeError

logger = logging.getLogger(__name__)

TAIL_ENLARGEMENT = 16.0


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray
    grid: QuadratureGrid

    def __post_init__(self):
        object.__setattr__(self, "values", as_grid_function(self.values, self.grid))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.size


def _values(f, grid, name="f"):
    if isinstance(f, GridFunction):
        if f.grid is not grid and f.grid.size != grid.size:
            raise ShapeError(f"{name} lives on a grid of {f.grid.size} nodes, expected {grid.size}")
        return f.values
    return as_grid_function(f, grid, name)


def lp_norm(f, grid, p):
    if not p >= 1:
        raise DomainError(f"p must be >= 1 for an L^p norm, got {p}")
    f = _values(f, grid)
    total = math.fsum(np.abs(f) ** p * grid.weights)
    return total ** (1.0 / p)


def normalize_p(f, grid, p):
    norm = lp_norm(f, grid, p)
    if norm == 0.0:
        raise DomainError("cannot normalize the zero function")
    return _values(f, grid) / norm


def bilinear_form(K, f, g):
    """sum_ij f_i K_ij g_j w_i w_j over the full matrix (no symmetrization)."""
    grid = K.grid
    f = _values(f, grid, "f")
    g = _values(g, grid, "g")
    return math.fsum(f * grid.weights * K.action(g))


def rayleigh_quotient(K, f, p):
    grid = K.grid
    f = _values(f, grid)
    if not np.any(f):
        raise DomainError("the Rayleigh quotient is undefined for the zero function")
    return abs(bilinear_form(K, f, f)) / lp_norm(f, grid, p) ** 2


def rayleigh_quotient_blockwise(grid, spec, params, f, p, threads=1, progress=False):
    """Same quotient as rayleigh_quotient, with the kernel applied row block by row block."""
    f = _values(f, grid)
    if not np.any(f):
        raise DomainError("the Rayleigh quotient is undefined for the zero function")
    Kf = apply_kernel_blockwise(grid, spec, params, f, threads=threads, progress=progress)
    return abs(math.fsum(f * grid.weights * Kf)) / lp_norm(f, grid, p) ** 2


def young_bound(K, grid, r):
    """C = max over rows and columns of (sum |K|^r w)^(1/r); then ||Af||_q <= C ||f||_p."""
    if not r >= 1:
        raise DomainError(f"Young exponent r must be >= 1, got {r}")
    if K.grid.size != grid.size:
        raise ShapeError(f"kernel of size {K.grid.size} does not match grid of {grid.size} nodes")

    powered = np.abs(K.entries) ** r
    rows = powered @ grid.weights
    cols = grid.weights @ powered
    return float(max(rows.max(), cols.max()) ** (1.0 / r))


def operator_norm_estimate(K, grid, p, q, tol=1e-10, max_iter=1000):
    """Lower estimate of sup ||Af||_q / ||f||_p for a nonnegative kernel.

    Nonlinear power iteration f <- (A^T (Af)^{q-1})^{1/(p-1)}; the best ratio seen
    is returned, so the value is a lower bound whatever the iteration does.
    """
    if not p > 1:
        raise DomainError(f"p must be > 1 for the power iteration, got {p}")
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}")
    if K.grid.size != grid.size:
        raise ShapeError(f"kernel of size {K.grid.size} does not match grid of {grid.size} nodes")

    f = normalize_p(np.ones(grid.size), grid, p)
    best, previous = 0.0, 0.0
    for it in range(max_iter):
        Af = K.action(f)
        ratio = lp_norm(Af, grid, q)
        best = max(best, ratio)
        if ratio == 0.0 or abs(ratio - previous) <= tol * ratio:
            break
        previous = ratio

        update = K.transpose_action(np.abs(Af) ** (q - 1.0)) ** (1.0 / (p - 1.0))
        if not np.any(update):
            break
        f = normalize_p(update, grid, p)

    logger.debug(f"Estimativa da norma p={p:g} -> q={q:g}: {best:.10g} em {it + 1} iterações")
    return float(best)


def _tail_mass(eps, R, params, resolution, enlarge):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not eps < R:
        raise DomainError(f"tail integrals need eps < R, got eps={eps:g}, R={R:g}")
    if not enlarge > 1:
        raise DomainError(f"enlargement factor must exceed 1, got {enlarge}")

    shell = cylinder_shell_grid(R, enlarge * R, resolution, n=params.n)
    f = extremal_family_array(eps, shell.z, shell.t, params)
    return math.fsum(f ** params.q_alpha * shell.weights)


def tail_integral_I1(eps, R, params, resolution, enlarge=TAIL_ENLARGEMENT):
    """2 B(f_eps, f_eps) restricted to H^n x (complement of Sigma_R).

    f_eps solves K f = D_H ||H||^{2-q} f^{q-1}, so the double integral collapses
    to 2 D_H ||H||^{2-q} times the integral of f_eps^q outside Sigma_R, truncated
    at Sigma_{enlarge R}.
    """
    q = params.q_alpha
    norm_H = extremal_norm_power(params) ** (1.0 / q)
    constant = 2.0 * sharp_constant_DH(params) * norm_H ** (2.0 - q)
    value = constant * _tail_mass(eps, R, params, resolution, enlarge)
    logger.debug(f"I1(eps={eps:g}, R={R:g}) = {value:.6e}")
    return value


def tail_hls_bound_I2(eps, R, params, resolution, enlarge=TAIL_ENLARGEMENT):
    """D_H ||f_eps||^2 over the complement of Sigma_R: the HLS bound on the doubly-outer term."""
    mass = _tail_mass(eps, R, params, resolution, enlarge)
    return sharp_constant_DH(params) * mass ** (2.0 / params.q_alpha)
