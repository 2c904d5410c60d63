"""The CR sphere S^{2n+1} in C^{n+1}: distance, extremals and the Cayley transform."""
from dataclasses import dataclass

import numpy as np

from geometry.heisenberg import HPoint
from utils.errors import DimensionError, DomainError, PoleError

POLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=complex))
        if xi.ndim != 1 or xi.size < 2:
            raise DimensionError(f"xi must be a vector of n+1 >= 2 complex numbers, got shape {xi.shape}")
        norm = np.linalg.norm(xi)
        if not np.isfinite(norm) or norm == 0.0:
            raise DomainError("cannot place a zero or non-finite vector on the sphere")
        # renormaliza: nós de quadratura acumulam erro de arredondamento
        object.__setattr__(self, "xi", xi / norm)

    @property
    def n(self):
        return self.xi.size - 1

    @classmethod
    def north_pole(cls, n):
        xi = np.zeros(n + 1, dtype=complex)
        xi[-1] = 1.0
        return cls(xi)


def sphere_dist(zeta, eta):
    if zeta.xi.size != eta.xi.size:
        raise DimensionError(f"points live on different spheres: {zeta.xi.size} vs {eta.xi.size} coordinates")
    # d(zeta, eta)^2 = 2 |1 - zeta . conj(eta)|
    return float(np.sqrt(2.0 * abs(1.0 - np.vdot(eta.xi, zeta.xi))))


def cayley(u):
    r2 = float(np.vdot(u.z, u.z).real)
    denom = 1.0 + r2 + 1j * u.t
    return SpherePoint(np.concatenate([2.0 * u.z / denom, [(1.0 - r2 - 1j * u.t) / denom]]))


def cayley_inv(xi):
    last = xi.xi[-1]
    if abs(1.0 + last) < POLE_TOLERANCE:
        raise PoleError("the pole (0,...,0,-1) has no preimage under the Cayley transform")
    z = xi.xi[:-1] / (1.0 + last)
    t = float(np.imag((1.0 - last) / (1.0 + last)))
    return HPoint(z, t)


def cayley_jacobian(u):
    n = u.n
    r2 = float(np.vdot(u.z, u.z).real)
    return 2.0 ** (2 * n + 1) / ((1.0 + r2) ** 2 + u.t ** 2) ** (n + 1)


def sphere_extremal(zeta, pole, params):
    pole = np.atleast_1d(np.asarray(pole, dtype=complex))
    if pole.size != zeta.xi.size:
        raise DimensionError(f"pole needs {zeta.xi.size} coordinates, got {pole.size}")
    if not np.linalg.norm(pole) < 1.0:
        raise DomainError(f"pole must lie inside the unit ball, |pole| = {np.linalg.norm(pole):g}")
    # f(zeta) = |1 - conj(pole) . zeta|^{-(Q+alpha)/2}
    return abs(1.0 - np.vdot(pole, zeta.xi)) ** (-(params.Q + params.alpha) / 2.0)


# --- formas vetorizadas -------------------------------------------------------

def sphere_dist_matrix(xi_rows, xi_cols=None):
    if xi_cols is None:
        xi_cols = xi_rows
    xi_rows = np.atleast_2d(xi_rows)
    xi_cols = np.atleast_2d(xi_cols)
    if xi_rows.shape[1] != xi_cols.shape[1]:
        raise DimensionError(f"points live on different spheres: {xi_rows.shape[1]} vs {xi_cols.shape[1]} coordinates")
    inner = xi_rows @ np.conj(xi_cols).T
    return np.sqrt(2.0 * np.abs(1.0 - inner))


def cayley_array(z, t):
    z = np.atleast_2d(z)
    t = np.asarray(t, dtype=float)
    r2 = np.sum(np.abs(z) ** 2, axis=-1)
    denom = 1.0 + r2 + 1j * t
    return np.column_stack([2.0 * z / denom[:, None], (1.0 - r2 - 1j * t) / denom])


def cayley_inv_array(xi):
    xi = np.atleast_2d(xi)
    last = xi[:, -1]
    if np.any(np.abs(1.0 + last) < POLE_TOLERANCE):
        raise PoleError("the pole (0,...,0,-1) has no preimage under the Cayley transform")
    z = xi[:, :-1] / (1.0 + last)[:, None]
    t = np.imag((1.0 - last) / (1.0 + last))
    return z, t


def sphere_extremal_array(xi, pole, params):
    pole = np.atleast_1d(np.asarray(pole, dtype=complex))
    if not np.linalg.norm(pole) < 1.0:
        raise DomainError(f"pole must lie inside the unit ball, |pole| = {np.linalg.norm(pole):g}")
    return np.abs(1.0 - np.atleast_2d(xi) @ np.conj(pole)) ** (-(params.Q + params.alpha) / 2.0)
