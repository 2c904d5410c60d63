import logging

import numpy as np

from data.preprocess import as_grid_function, require_positive
from utils.errors import DomainError

logger = logging.getLogger(__name__)


def curvature_exponent(params):
    return (params.Q + params.alpha) / (params.Q - params.alpha)


def normalize_curvature_scale(K, phi, params):
    """Multiply phi by the constant c that matches the means of phi^s and K phi."""
    s = curvature_exponent(params)
    ratio = np.mean(K.action(phi)) / np.mean(phi ** s)
    return phi * ratio ** (1.0 / (s - 1.0))


def phi_from_maximizer(f, p):
    """phi = f^{p-1}, the curvature-equation unknown carried by a maximizer at exponent p."""
    if not 1 < p < 2:
        raise DomainError(f"p must lie in (1, 2), got {p}")
    phi = np.clip(np.asarray(f, dtype=float), 0.0, None) ** (p - 1.0)
    # nós onde f se anula ficam com o menor positivo representável
    return np.maximum(phi, np.finfo(float).tiny)


def curvature_equation_residual(K, grid, phi, params, normalize=True):
    """sup_i |phi_i^{(Q+alpha)/(Q-alpha)} - sum_j K_ij phi_j w_j|."""
    phi = require_positive(as_grid_function(phi, grid, "phi"), "phi")
    if normalize:
        phi = normalize_curvature_scale(K, phi, params)
    residual = float(np.max(np.abs(phi ** curvature_exponent(params) - K.action(phi))))
    logger.info(f"Resíduo da equação de curvatura: {residual:.6e}")
    return residual
