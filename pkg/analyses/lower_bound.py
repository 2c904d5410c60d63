import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from data.discretization import KernelSpec, assemble_kernel, cylinder_grid, sphere_grid
from data.preprocess import restrict_to
from geometry.cr_sphere import cayley_inv_array
from geometry.heisenberg import extremal_family_array
from solvers.hls_functional import rayleigh_quotient, rayleigh_quotient_blockwise
from utils.errors import DomainError

logger = logging.getLogger(__name__)

MANIFOLDS = ("cylinder", "sphere")


def _check_scales(eps, R):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if not eps < R:
        raise DomainError(f"lower bound needs eps < R, got eps={eps:g}, R={R:g}")


def cylinder_lower_bound(eps, R, resolution, params, threads=1, progress=False):
    # malha graduada na escala eps do pico de f_eps; o núcleo é aplicado por blocos
    grid = cylinder_grid(R, resolution, n=params.n, core=eps)
    f = extremal_family_array(eps, grid.z, grid.t, params)
    return rayleigh_quotient_blockwise(grid, KernelSpec(), params, f, params.q_alpha,
                                       threads=threads, progress=progress)


def sphere_lower_bound(eps, R, resolution, params, threads=1, progress=False):
    """Same quotient read through the Cayley transform: the indicator of C(Sigma_{R/eps}) on S^3."""
    grid = sphere_grid(resolution, n=params.n)
    z, t = cayley_inv_array(grid.xi)
    ratio = R / eps
    # f_eps * 1_{Sigma_R} corresponde à indicadora de C(Sigma_{R/eps}) na esfera
    inside = (np.sqrt(np.sum(np.abs(z) ** 2, axis=1)) < ratio) & (np.abs(t) < ratio ** 2)
    if not np.any(inside):
        raise DomainError(f"no sphere node falls inside C(Sigma_R) for R/eps={ratio:g}; refine the grid")
    f = restrict_to(np.ones(grid.size), inside)
    K = assemble_kernel(grid, KernelSpec(), params, threads=threads, progress=progress)
    return rayleigh_quotient(K, f, params.q_alpha)


def lower_bound_experiment(eps, R, resolution, params, manifold="cylinder", threads=1, progress=False):
    """Rayleigh quotient of the truncated extremal f_eps * 1_{Sigma_R} at the critical exponent."""
    _check_scales(eps, R)
    if manifold not in MANIFOLDS:
        raise DomainError(f"manifold must be one of {MANIFOLDS}, got {manifold!r}")

    if manifold == "cylinder":
        quotient = cylinder_lower_bound(eps, R, resolution, params, threads, progress)
    else:
        quotient = sphere_lower_bound(eps, R, resolution, params, threads, progress)
    logger.info(f"Cota inferior ({manifold}) R/eps={R / eps:g}: quociente={quotient:.8f}")
    return quotient


def lower_bound_sweep(eps, ratios, resolution, params, manifold="cylinder", threads=1, progress=False):
    rows = []
    for ratio in tqdm(ratios, desc="varredura R/eps", disable=not progress):
        quotient = lower_bound_experiment(eps, ratio * eps, resolution, params, manifold, threads)
        rows.append({"manifold": manifold, "eps": eps, "R": ratio * eps, "R_over_eps": ratio,
                     "quotient": quotient})
    return pd.DataFrame(rows)
