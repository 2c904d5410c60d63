import logging

import numpy as np
import pandas as pd
from scipy.stats import linregress
from tqdm import tqdm

from analyses.lower_bound import cylinder_lower_bound
from data.discretization import cylinder_grid
from geometry.heisenberg import extremal_family_array
from geometry.numerics_core import extremal_norm_power, sharp_constant_DH
from solvers.hls_functional import lp_norm, tail_hls_bound_I2, tail_integral_I1
from utils.errors import DomainError

logger = logging.getLogger(__name__)

# O integrando de I1 só depende de |z| e t; poucas fases bastam
DEFAULT_TAIL_RESOLUTION = (16, 4, 16, 4)
UPPER_BOUND_SLACK = 0.02
INVARIANCE_TOLERANCE = 0.01


def extremal_norm_on_cylinder(eps, R, resolution, params):
    """||f_eps||_{q_alpha} restricted to Sigma_R."""
    grid = cylinder_grid(R, resolution, n=params.n, core=eps)
    f = extremal_family_array(eps, grid.z, grid.t, params)
    return lp_norm(f, grid, params.q_alpha)


def epsilon_invariance(eps_values, ratio, resolution, params):
    rows = []
    for eps in eps_values:
        norm = extremal_norm_on_cylinder(eps, ratio * eps, resolution, params)
        rows.append({"eps": eps, "R": ratio * eps, "norm": norm})
    df = pd.DataFrame(rows)
    spread = float((df["norm"].max() - df["norm"].min()) / df["norm"].max())
    logger.info(f"Invariância em eps (R/eps={ratio:g}): dispersão relativa {spread:.3e}")
    return df, spread


def hls_upper_bound_check(eps, R, resolution, params, threads=1, progress=False):
    if not 0 < eps < R:
        raise DomainError(f"need 0 < eps < R, got eps={eps}, R={R}")
    quotient = cylinder_lower_bound(eps, R, resolution, params, threads, progress)
    D_H = sharp_constant_DH(params)
    return {
        "quotient": quotient,
        "D_H": D_H,
        "ratio_to_D_H": quotient / D_H,
        "within_bound": bool(quotient <= D_H * (1.0 + UPPER_BOUND_SLACK)),
    }


def tail_scaling(ratios, params, resolution=DEFAULT_TAIL_RESOLUTION, eps=1.0, progress=False):
    """I1 and the HLS bound on I2 over a sweep of R/eps, with log-log slopes."""
    ratios = sorted(float(r) for r in ratios)
    if len(ratios) < 2:
        raise DomainError("the slope fit needs at least two ratios")

    rows = []
    for ratio in tqdm(ratios, desc="cauda I1", disable=not progress):
        R = ratio * eps
        rows.append({
            "R_over_eps": ratio,
            "I1": tail_integral_I1(eps, R, params, resolution),
            "I2_bound": tail_hls_bound_I2(eps, R, params, resolution),
        })
    df = pd.DataFrame(rows)

    log_ratio = np.log(df["R_over_eps"])
    fit_I1 = linregress(log_ratio, np.log(df["I1"]))
    fit_I2 = linregress(log_ratio, np.log(df["I2_bound"]))
    slopes = {
        "I1_slope": float(fit_I1.slope),
        "I1_rvalue": float(fit_I1.rvalue),
        "I2_bound_slope": float(fit_I2.slope),
        "expected_I1_slope": -float(params.Q),
        "expected_I2_slope": -float(params.Q + params.alpha),
    }
    logger.info(f"Inclinação log-log de I1: {slopes['I1_slope']:.4f} (esperado {-params.Q})")
    return df, slopes


def run_hls_verification(eps, R, eps_values, ratios, resolution, params, threads=1, progress=False):
    norms, spread = epsilon_invariance(eps_values, R / eps, resolution, params)
    tails, slopes = tail_scaling(ratios, params, progress=progress)
    upper = hls_upper_bound_check(eps, R, resolution, params, threads, progress)

    summary = {
        "D_H": sharp_constant_DH(params),
        "extremal_norm": extremal_norm_power(params) ** (1.0 / params.q_alpha),
        "eps_invariance": {
            "norms": norms.to_dict(orient="records"),
            "relative_spread": spread,
            "within_tolerance": bool(spread <= INVARIANCE_TOLERANCE),
        },
        "upper_bound": upper,
        "tail": slopes,
    }
    return summary, tails
