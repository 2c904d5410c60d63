"""Subcritical extremal problem D_{M,p}: damped Euler-Lagrange iteration, continuation and blow-up rescaling."""
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import DEFAULT_MAX_ITER, DEFAULT_TOL
from solvers.hls_functional import normalize_p, rayleigh_quotient
from utils.errors import ConvergenceError, DomainError, ShapeError

logger = logging.getLogger(__name__)

MIN_STEP = 2.0 ** -30
# tolerância relativa para aceitar um passo que não aumenta o quociente (ruído de arredondamento)
ASCENT_SLACK = 1e-13
STEP_GROWTH_THRESHOLD = 1e-8
PROFILE_RADIUS_FACTOR = 4.0


@dataclass
class SubcriticalResult:
    p: float
    D_estimate: float
    f: np.ndarray
    iterations: int
    residual: float
    converged: bool
    history: dict = field(default_factory=dict)

    def to_dict(self, include_f=True):
        data = {
            "p": self.p,
            "D": self.D_estimate,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if include_f:
            data["f"] = self.f
        return data


@dataclass
class BlowupReport:
    p: float
    mu_p: float
    center_index: int
    profile: pd.DataFrame
    profile_deviation: float

    def to_dict(self):
        return {
            "p": self.p,
            "mu_p": self.mu_p,
            "center_index": self.center_index,
            "profile_deviation": self.profile_deviation,
            "profile": self.profile.to_dict(orient="records"),
        }


def _check_window(p, params=None, q_alpha=None):
    lower = params.q_alpha if params is not None else q_alpha
    if lower is None:
        lower = 1.0
    if not lower < p < 2.0:
        raise DomainError(f"p must lie in the subcritical window ({lower:g}, 2), got {p}")


def _check_kernel(K, grid):
    if K.grid.size != grid.size:
        raise ShapeError(f"kernel of size {K.grid.size} does not match grid of {grid.size} nodes")
    if np.any(K.entries < 0):
        raise DomainError("the Euler-Lagrange iteration needs an entrywise nonnegative kernel")
    if not np.any(K.entries):
        raise DomainError("the kernel is identically zero; D_{M,p} vanishes")


def _initial_iterate(init, grid, p):
    if isinstance(init, str):
        if init != "uniform":
            raise DomainError(f"unknown initial guess {init!r}; use 'uniform' or an array")
        return normalize_p(np.ones(grid.size), grid, p)

    init = np.asarray(init, dtype=float)
    if init.shape != (grid.size,):
        raise ShapeError(f"initial guess has {init.size} values for a grid of {grid.size} nodes")
    if np.any(init <= 0):
        raise DomainError("initial guess must be strictly positive")
    return normalize_p(init, grid, p)


def el_gradient(K, f):
    """Symmetrized action (Kf)_i + (K^T f)_i, the right-hand side of 2 D f^{p-1} = ..."""
    return K.action(f) + K.transpose_action(f)


def el_defect(K, f, D, p):
    return float(np.max(np.abs(2.0 * D * f ** (p - 1.0) - el_gradient(K, f))))


def _damped_step(K, grid, f, D, p, tau):
    # f <- normalize(f^(1-tau) T(f)^tau); tau = 1 é o mapa de ponto fixo sem amortecimento
    target = el_gradient(K, f) ** (1.0 / (p - 1.0))
    while tau >= MIN_STEP:
        candidate = f ** (1.0 - tau) * target ** tau
        if np.any(candidate):
            candidate = normalize_p(candidate, grid, p)
            D_new = rayleigh_quotient(K, candidate, p)
            if D_new >= D * (1.0 - ASCENT_SLACK):
                return candidate, D_new, tau
        tau *= 0.5
    return f, D, 0.0


def solve_subcritical(K, grid, p, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, init="uniform",
                      params=None, q_alpha=None):
    """Maximize B(f, f) over ||f||_p = 1, f >= 0.

    Without params (or an explicit q_alpha) the window is 1 < p < 2. The
    iteration never decreases the quotient; non-convergence within max_iter is
    reported through ``converged=False``.
    """
    _check_window(p, params, q_alpha)
    _check_kernel(K, grid)
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise DomainError(f"max_iter must be >= 1, got {max_iter}")

    f = _initial_iterate(init, grid, p)
    D = rayleigh_quotient(K, f, p)
    history = {"quotient": [D], "step": [], "defect": []}
    converged = False
    defect = el_defect(K, f, D, p)
    iterations = 0
    # o passo só volta a crescer enquanto o ganho no quociente está acima do ruído
    step = 1.0

    for iterations in range(1, max_iter + 1):
        f_new, D_new, tau = _damped_step(K, grid, f, D, p, step)
        change = abs(D_new - D) / D
        if tau > 0.0:
            step = min(1.0, 2.0 * tau) if change > STEP_GROWTH_THRESHOLD else tau
        f, D = f_new, D_new
        defect = el_defect(K, f, D, p)

        history["quotient"].append(D)
        history["step"].append(tau)
        history["defect"].append(defect)
        logger.debug(f"p={p:g} iter={iterations}: D={D:.15g}, passo={tau:g}, defeito={defect:.3e}")

        if change < tol and defect <= tol * (1.0 + D):
            converged = True
            break
        if tau == 0.0:
            logger.warning(f"Busca de passo estagnou em p={p:g} (iteração {iterations}, defeito={defect:.3e})")
            break

    if not converged:
        logger.warning(f"Sem convergência em p={p:g} após {iterations} iterações (defeito={defect:.3e})")

    return SubcriticalResult(
        p=float(p),
        D_estimate=rayleigh_quotient(K, f, p),
        f=f,
        iterations=iterations,
        residual=defect,
        converged=converged,
        history=history,
    )


def continuation(K, grid, p_schedule, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, params=None,
                 q_alpha=None, warm_start=True, progress=False):
    """Solve along a strictly decreasing schedule of p, each stage started from the previous maximizer."""
    schedule = [float(p) for p in p_schedule]
    if not schedule:
        raise DomainError("p_schedule must contain at least one exponent")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise DomainError(f"p_schedule must be strictly decreasing, got {schedule}")
    for p in schedule:
        _check_window(p, params, q_alpha)

    results = []
    init = "uniform"
    for p in tqdm(schedule, desc="continuação em p", disable=not progress):
        result = solve_subcritical(K, grid, p, tol=tol, max_iter=max_iter, init=init,
                                   params=params, q_alpha=q_alpha)
        logger.info(f"Estágio p={p:.6g}: D={result.D_estimate:.10g}, iterações={result.iterations}, "
                    f"convergiu={result.converged}")
        results.append(result)
        if warm_start:
            # mantém o chute estritamente positivo
            init = np.maximum(result.f, np.finfo(float).tiny)
    return results


def reference_profile(s, params, axis="horizontal"):
    """H at Heisenberg radius s along one axis of H^n.

    H is not a function of the Heisenberg norm alone. On the sphere |u| = s it
    runs from (1 + s^2)^{-(Q+alpha)/2} on the horizontal axis (t = 0) up to
    (1 + s^4)^{-(Q+alpha)/4} on the vertical axis (z = 0).
    """
    s = np.asarray(s, dtype=float)
    if axis == "horizontal":
        return (1.0 + s ** 2) ** (-(params.Q + params.alpha) / 2.0)
    if axis == "vertical":
        return (1.0 + s ** 4) ** (-(params.Q + params.alpha) / 4.0)
    raise DomainError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def distance_to_profile_band(g, s, params):
    """How far g(s) falls outside [H horizontal, H vertical] at each radius s."""
    low = reference_profile(s, params, "horizontal")
    high = reference_profile(s, params, "vertical")
    g = np.asarray(g, dtype=float)
    return np.maximum(0.0, np.maximum(low - g, g - high))


def blowup_diagnostic(result, grid, params, radius_factor=PROFILE_RADIUS_FACTOR):
    if not result.converged:
        raise ConvergenceError(f"blow-up rescaling needs a converged maximizer (p={result.p:g})")
    if not radius_factor > 0:
        raise DomainError(f"radius_factor must be positive, got {radius_factor}")
    f = np.asarray(result.f, dtype=float)
    if f.shape != (grid.size,):
        raise ShapeError(f"maximizer has {f.size} values for a grid of {grid.size} nodes")

    center = int(np.argmax(f))  # empate: menor índice
    f_max = float(f[center])
    if not f_max > 0:
        raise DomainError("maximizer vanishes identically")
    mu = f_max ** (-(2.0 - result.p) / params.alpha)

    # g_p = mu^{alpha/(2-p)} f_p = f_p / f_max, logo g_p(centro) = 1
    g = f / f_max
    rho = grid.distance_block(slice(center, center + 1))[0]
    rho[center] = 0.0
    inside = np.flatnonzero(rho <= radius_factor * mu)
    radii = rho[inside] / mu

    profile = pd.DataFrame({
        "node": inside,
        "radius": radii,
        "g": g[inside],
        "reference": reference_profile(radii, params),
        "reference_vertical": reference_profile(radii, params, "vertical"),
    }).sort_values(["radius", "node"], kind="stable").reset_index(drop=True)

    if len(profile) == 1:
        logger.warning(f"Perfil reescalado contém só o centro (mu_p={mu:.4g}); malha grossa demais")
    deviation = float(np.max(distance_to_profile_band(profile["g"], profile["radius"], params)))

    return BlowupReport(p=result.p, mu_p=mu, center_index=center, profile=profile,
                        profile_deviation=deviation)
