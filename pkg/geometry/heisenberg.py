"""Group law, homogeneous norm and dilations of H^n, plus the extremal family H, f_eps.

Points are kept in Cartesian complex coordinates; the ``*_array`` variants act on
stacked coordinates ``z`` of shape (N, n) and ``t`` of shape (N,).
"""
from dataclasses import dataclass

import numpy as np

from utils.errors import DimensionError, DomainError


@dataclass(frozen=True)
class HPoint:
    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        if z.ndim != 1 or z.size == 0:
            raise DimensionError(f"z must be a non-empty vector of complex numbers, got shape {z.shape}")
        t = float(self.t)
        if not (np.all(np.isfinite(z)) and np.isfinite(t)):
            raise DomainError("HPoint coordinates must be finite")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", t)

    @property
    def n(self):
        return self.z.size

    @classmethod
    def origin(cls, n):
        return cls(np.zeros(n, dtype=complex), 0.0)

    def __eq__(self, other):
        if not isinstance(other, HPoint):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.z, other.z) and self.t == other.t

    def __hash__(self):
        return hash((self.z.tobytes(), self.t))


def _check_same_n(u, v):
    if u.n != v.n:
        raise DimensionError(f"points live in different groups: n={u.n} and n={v.n}")


def group_mul(u, v):
    _check_same_n(u, v)
    # (z,t)(z',t') = (z+z', t+t'+2 Im(z . conj(z')))
    return HPoint(u.z + v.z, u.t + v.t + 2.0 * np.imag(np.vdot(v.z, u.z)))


def group_inv(u):
    return HPoint(-u.z, -u.t)


def hnorm(u):
    r2 = float(np.vdot(u.z, u.z).real)
    return (r2 * r2 + u.t * u.t) ** 0.25


def hdist(u, v):
    _check_same_n(u, v)
    return hnorm(group_mul(group_inv(v), u))


def dilate(r, u):
    if not r > 0:
        raise DomainError(f"dilation factor must be positive, got {r}")
    return HPoint(r * u.z, r * r * u.t)


def extremal_H(u, params):
    r2 = float(np.vdot(u.z, u.z).real)
    return ((1.0 + r2) ** 2 + u.t ** 2) ** (-(params.Q + params.alpha) / 4.0)


def extremal_family(eps, u, params):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    scale = eps ** (-(params.Q + params.alpha) / 2.0)
    return scale * extremal_H(dilate(1.0 / eps, u), params)


def conformal_factor(u):
    """a(u) = (4/((1+|z|^2)^2+t^2))^{1/4}; a(u)^{2Q} equals twice the Cayley Jacobian."""
    r2 = float(np.vdot(u.z, u.z).real)
    return (4.0 / ((1.0 + r2) ** 2 + u.t ** 2)) ** 0.25


# --- formas vetorizadas -------------------------------------------------------

def hnorm_array(z, t):
    r2 = np.sum(np.abs(np.atleast_2d(z)) ** 2, axis=-1)
    return (r2 * r2 + np.asarray(t, dtype=float) ** 2) ** 0.25


def hdist_matrix(z_rows, t_rows, z_cols=None, t_cols=None):
    """Matrix d(u_i, v_j) = |v_j^{-1} u_i| for row points u and column points v."""
    if z_cols is None:
        z_cols, t_cols = z_rows, t_rows
    z_rows = np.atleast_2d(z_rows)
    z_cols = np.atleast_2d(z_cols)
    if z_rows.shape[1] != z_cols.shape[1]:
        raise DimensionError(f"points live in different groups: n={z_rows.shape[1]} and n={z_cols.shape[1]}")

    dz = z_rows[:, None, :] - z_cols[None, :, :]
    # v^{-1}u = (z - z', t - t' + 2 Im((-z') . conj(z)))
    cross = np.imag(np.einsum("jk,ik->ij", z_cols, np.conj(z_rows)))
    dt = np.asarray(t_rows)[:, None] - np.asarray(t_cols)[None, :] - 2.0 * cross
    r2 = np.sum(np.abs(dz) ** 2, axis=-1)
    return (r2 * r2 + dt * dt) ** 0.25


def extremal_H_array(z, t, params):
    r2 = np.sum(np.abs(np.atleast_2d(z)) ** 2, axis=-1)
    return ((1.0 + r2) ** 2 + np.asarray(t, dtype=float) ** 2) ** (-(params.Q + params.alpha) / 4.0)


def extremal_family_array(eps, z, t, params):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    scale = eps ** (-(params.Q + params.alpha) / 2.0)
    return scale * extremal_H_array(np.asarray(z) / eps, np.asarray(t) / eps ** 2, params)


def conformal_factor_array(z, t):
    r2 = np.sum(np.abs(np.atleast_2d(z)) ** 2, axis=-1)
    return (4.0 / ((1.0 + r2) ** 2 + np.asarray(t, dtype=float) ** 2)) ** 0.25
