import dataclasses
import logging

import numpy as np

from data.discretization import KernelMatrix
from data.preprocess import as_grid_function, require_positive

logger = logging.getLogger(__name__)


def conformal_change(K, phi, params):
    """Kernel and weights of the rescaled contact form phi^{2/(Q-2)} theta.

    K~_ij = (phi_i phi_j)^{-(Q-alpha)/(Q-2)} K_ij and w~ = phi^{2Q/(Q-2)} w.
    """
    grid = K.grid
    phi = require_positive(as_grid_function(phi, grid, "phi"), "phi")
    gamma = params.green_exponent
    scale = phi ** (-gamma)
    weights = phi ** (2.0 * params.Q / (params.Q - 2)) * grid.weights
    new_grid = dataclasses.replace(grid, weights=weights)
    return KernelMatrix(np.outer(scale, scale) * K.entries, K.spec, new_grid)


def conformal_covariance_check(K, grid, phi, u, params):
    """Relative sup residual of I~(u) = phi^{-(Q-alpha)/(Q-2)} I(phi^{(Q+alpha)/(Q-2)} u)."""
    phi = require_positive(as_grid_function(phi, grid, "phi"), "phi")
    u = as_grid_function(u, grid, "u")

    K_tilde = conformal_change(K, phi, params)
    lhs = K_tilde.action(u)
    rhs = phi ** (-params.green_exponent) * K.action(phi ** ((params.Q + params.alpha) / (params.Q - 2)) * u)

    scale = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
    residual = float(np.max(np.abs(lhs - rhs))) / scale
    logger.debug(f"Resíduo de covariância conforme: {residual:.3e}")
    return residual
