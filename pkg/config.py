import json
import os
from dataclasses import asdict, dataclass, fields

from geometry.numerics_core import make_params
from utils.errors import DomainError

DEFAULT_N = 1
DEFAULT_ALPHA = 2.0
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
DEFAULT_SPHERE_RESOLUTION = (8, 32, 32)
DEFAULT_CHECK_RESOLUTION = (4, 6, 6)
DEFAULT_CYLINDER_RESOLUTION = (16, 32, 16, 4)
DEFAULT_OUTPUT_DIR = "results"
THREADS_ENV_VAR = "HLS_THREADS"
DEFAULT_SEED = 7

# Escala padrão do truncamento: R/eps = 50
DEFAULT_EPS = 0.1
DEFAULT_R = 5.0
DEFAULT_EPS_VALUES = (0.05, 0.1, 0.2)
DEFAULT_TAIL_RATIOS = (8.0, 16.0, 32.0, 64.0)

# Continuação em p para alpha = 2, n = 1 (q_alpha = 4/3)
DEFAULT_P_SCHEDULE = (1.8, 1.6, 1.45, 1.36, 4.0 / 3.0 + 1e-3)
CRITICAL_OFFSET = 1e-3

COMMANDS = (
    "constants",
    "verify-hls",
    "extremal-sub",
    "continuation",
    "lower-bound",
    "mass-experiment",
    "covariance-check",
    "curvature-residual",
)
SPHERE_COMMANDS = ("continuation", "mass-experiment", "covariance-check", "curvature-residual")
PHI_CHOICES = ("random", "constant", "maximizer")


def default_p_schedule(q_alpha):
    end = q_alpha + CRITICAL_OFFSET
    head = [p for p in DEFAULT_P_SCHEDULE[:-1] if p > end]
    return tuple(head) + (end,)


def resolve_threads(threads=None):
    if threads is not None:
        return int(threads)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        return int(env)
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    command: str = "constants"
    n: int = DEFAULT_N
    alpha: float = DEFAULT_ALPHA
    sphere_resolution: tuple = DEFAULT_SPHERE_RESOLUTION
    check_resolution: tuple = DEFAULT_CHECK_RESOLUTION
    cylinder_resolution: tuple = DEFAULT_CYLINDER_RESOLUTION
    eps: float = DEFAULT_EPS
    R: float = DEFAULT_R
    eps_values: tuple = DEFAULT_EPS_VALUES
    tail_ratios: tuple = DEFAULT_TAIL_RATIOS
    manifold: str = "cylinder"
    p: float = None
    p_schedule: tuple = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    A0: float = 1.0
    c_w: float = 0.0
    fixture: str = None
    phi: str = "random"
    output: str = DEFAULT_OUTPUT_DIR
    seed: int = DEFAULT_SEED
    threads: int = None
    strict: bool = False

    @classmethod
    def from_sources(cls, command, config_path=None, overrides=None):
        """Defaults, then the JSON file, then explicit flags (None means 'not given')."""
        values = {}
        if config_path:
            with open(config_path) as f:
                values.update(json.load(f))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        values["command"] = command

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise DomainError(f"unknown configuration keys: {unknown}")

        for key in ("sphere_resolution", "check_resolution", "cylinder_resolution",
                    "eps_values", "tail_ratios", "p_schedule"):
            if values.get(key) is not None:
                values[key] = tuple(values[key])
        return cls(**values)

    def to_dict(self):
        data = asdict(self)
        data["threads"] = resolve_threads(self.threads)
        return data

    def validate(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}; choose one of {COMMANDS}")
        params = make_params(self.n, self.alpha)

        if self.command in SPHERE_COMMANDS and params.n != 1:
            raise DomainError(f"{self.command} runs on S^3 grids and needs n=1, got n={params.n}")
        if self.command == "lower-bound" and self.manifold == "sphere" and params.n != 1:
            raise DomainError(f"the sphere-side lower bound needs n=1, got n={params.n}")
        if self.manifold not in ("cylinder", "sphere"):
            raise DomainError(f"manifold must be 'cylinder' or 'sphere', got {self.manifold!r}")
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if resolve_threads(self.threads) < 1:
            raise DomainError(f"threads must be >= 1, got {self.threads}")

        for name, length in (("sphere_resolution", 3), ("check_resolution", 3), ("cylinder_resolution", 4)):
            res = getattr(self, name)
            if len(res) != length or min(res) < 4:
                raise DomainError(f"{name} needs {length} integers >= 4, got {list(res)}")

        if self.command in ("lower-bound", "verify-hls"):
            if not 0 < self.eps < self.R:
                raise DomainError(f"need 0 < eps < R, got eps={self.eps}, R={self.R}")
        if self.command == "verify-hls":
            if min(self.eps_values) <= 0 or min(self.tail_ratios) <= 1:
                raise DomainError("eps_values must be positive and tail_ratios must exceed 1")
            if len(self.tail_ratios) < 2:
                raise DomainError("the tail slope fit needs at least two ratios")

        if self.command in ("continuation", "mass-experiment", "curvature-residual"):
            schedule = self.resolved_schedule(params)
            if any(b >= a for a, b in zip(schedule, schedule[1:])):
                raise DomainError(f"p_schedule must be strictly decreasing, got {list(schedule)}")
            if not all(params.q_alpha < p < 2 for p in schedule):
                raise DomainError(f"p_schedule must lie in ({params.q_alpha:g}, 2), got {list(schedule)}")
        if self.command == "extremal-sub" and self.p is not None:
            # na esfera p fica em (q_alpha, 2); um fixture só pede p em (1, 2)
            low = 1.0 if self.fixture else params.q_alpha
            if not low < self.p < 2:
                raise DomainError(f"p must lie in ({low:g}, 2), got {self.p}")
        if self.command == "mass-experiment" and self.A0 < 0:
            raise DomainError(f"A0 must be >= 0, got {self.A0}")
        if self.c_w < 0:
            raise DomainError(f"c_w must be >= 0, got {self.c_w}")
        if self.phi not in PHI_CHOICES:
            raise DomainError(f"phi must be one of {PHI_CHOICES}, got {self.phi!r}")
        return params

    def resolved_schedule(self, params):
        if self.p_schedule:
            return tuple(float(p) for p in self.p_schedule)
        return default_p_schedule(params.q_alpha)
