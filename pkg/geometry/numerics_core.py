"""Dimensional bookkeeping, the Gamma function and the sharp HLS constant D_H."""
import math
from dataclasses import dataclass

import numpy as np

from utils.errors import DomainError

# Lanczos rational approximation (g = 6.0246800407767295, 13 termos),
# coeficientes do maior grau para o menor, no formato de numpy.polyval.
LANCZOS_G = 6.024680040776729583740234375
LANCZOS_NUM = np.array([
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
])
LANCZOS_DENOM = np.array([
    1.0, 66.0, 1925.0, 32670.0, 357423.0, 2637558.0, 13339535.0,
    45995730.0, 105258076.0, 150917976.0, 120543840.0, 39916800.0, 0.0,
])


@dataclass(frozen=True)
class Params:
    n: int
    Q: int
    alpha: float
    p_alpha: float
    q_alpha: float
    b_n: float

    @property
    def kernel_exponent(self):
        # expoente de rho no núcleo puro: rho^(alpha - Q)
        return self.alpha - self.Q

    @property
    def green_exponent(self):
        return (self.Q - self.alpha) / (self.Q - 2)


def make_params(n, alpha):
    if isinstance(n, bool) or not float(n).is_integer() or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    n = int(n)
    Q = 2 * n + 2
    alpha = float(alpha)
    if not (0.0 < alpha < Q):
        raise DomainError(f"alpha must satisfy 0 < alpha < Q={Q}, got {alpha:g}")

    return Params(
        n=n,
        Q=Q,
        alpha=alpha,
        p_alpha=2.0 * Q / (Q - alpha),
        q_alpha=2.0 * Q / (Q + alpha),
        b_n=2.0 * Q / (Q - 2),
    )


def _lanczos_sum_expg_scaled(x):
    if x < 1.0:
        # avalia em 1/x para manter os termos limitados perto de zero
        y = 1.0 / x
        num = np.polyval(LANCZOS_NUM[::-1], y)
        den = np.polyval(LANCZOS_DENOM[::-1], y)
        return num / den
    return np.polyval(LANCZOS_NUM, x) / np.polyval(LANCZOS_DENOM, x)


def log_gamma(x):
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x}")

    if x < 0.5:
        # Gamma(x) = Gamma(x + 1) / x evita a perda de precisão em x pequeno
        return log_gamma(x + 1.0) - math.log(x)

    zgh = x + LANCZOS_G - 0.5
    return (x - 0.5) * (math.log(zgh) - 1.0) + math.log(_lanczos_sum_expg_scaled(x))


def sharp_constant_DH(params):
    n, Q, alpha = params.n, params.Q, params.alpha
    log_value = (
        0.5 * (Q - alpha) * math.log(2.0 * math.pi)
        + log_gamma(n + 1)
        + log_gamma(alpha / 2.0)
        - 2.0 * log_gamma((Q + alpha) / 4.0)
    )
    return math.exp(log_value)


def extremal_norm_power(params):
    """||H||_{q_alpha}^{q_alpha} = pi^(n+1) with respect to dV_0."""
    return math.pi ** (params.n + 1)
