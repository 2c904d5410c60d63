"""Quadrature grids on S^3 and on cylinders of H^n, and singular kernel assembly.

Weights carry the CR volume forms: dV_S = 2^{2n+1} n! dxi on the sphere and
dV_0 = 2^{2n} n! du on H^n. The diagonal of every assembled kernel is zero.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre
from tqdm import tqdm

from geometry.cr_sphere import SpherePoint, sphere_dist_matrix
from geometry.heisenberg import HPoint, hdist_matrix
from utils.errors import DomainError, KernelAssemblyError, ShapeError

logger = logging.getLogger(__name__)

GRID_KINDS = ("sphere", "cylinder", "discrete")
KERNEL_KINDS = ("pure_singular", "green_model")
MIN_RESOLUTION = 4
MIN_RING_PHASES = 3
GOLDEN_TILT = (math.sqrt(5.0) - 1.0) / 2.0
SILVER_SHIFT = math.sqrt(2.0) - 1.0
DEFAULT_BLOCK_SIZE = 256


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    kind: str
    n: int
    weights: np.ndarray
    resolution: tuple = ()
    xi: np.ndarray = None
    z: np.ndarray = None
    t: np.ndarray = None
    region: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.weights.size

    @property
    def total_weight(self):
        return float(math.fsum(self.weights))

    def point(self, i):
        if self.kind == "sphere":
            return SpherePoint(self.xi[i])
        if self.kind == "cylinder":
            return HPoint(self.z[i], self.t[i])
        raise DomainError("discrete grids carry weights only, no geometric nodes")

    def distance_block(self, rows, cols=None):
        """rho(node_i, node_j) for i in rows and j in cols (all nodes by default)."""
        cols = slice(None) if cols is None else cols
        if self.kind == "sphere":
            return sphere_dist_matrix(self.xi[rows], self.xi[cols])
        if self.kind == "cylinder":
            return hdist_matrix(self.z[rows], self.t[rows], self.z[cols], self.t[cols])
        raise DomainError("discrete grids have no distance function; build the kernel from explicit entries")

    def describe(self):
        return {"kind": self.kind, "n": self.n, "N": self.size, "resolution": list(self.resolution),
                "total_weight": self.total_weight, **self.region}


def _check_resolution(resolution, length, name):
    resolution = tuple(int(m) for m in resolution)
    if len(resolution) != length:
        raise DomainError(f"{name} resolution needs {length} integers, got {resolution}")
    if min(resolution) < MIN_RESOLUTION:
        raise DomainError(f"{name} resolution components must be >= {MIN_RESOLUTION}, got {resolution}")
    return resolution


def _gauss_legendre(m, lo, hi):
    x, w = roots_legendre(m)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _periodic(m):
    # regra do trapézio periódica, deslocada de meio passo
    return 2.0 * np.pi * (np.arange(m) + 0.5) / m, np.full(m, 2.0 * np.pi / m)


def _ring_count(m, radius):
    # ao menos dois nós por círculo: cada anel fica com centro de massa na origem
    return max(2, int(np.rint(m * radius)))


def _ring_nodes(theta, columns, fibers, shift_columns, shift_fibers):
    """Nodes of one Hopf ring as a lattice in (psi, phi2) with psi = phi1 - phi2.

    phi2 alone moves along the Hopf fiber; a step in psi is horizontal up to a
    fiber drift of cos(theta)^2 per radian. Column a is lifted along the fiber
    so that consecutive columns differ by GOLDEN_TILT fiber cells, and the lift
    closes after `columns` steps.
    """
    c, s = np.cos(theta), np.sin(theta)
    lift = np.rint(GOLDEN_TILT * columns - c * c * fibers) / columns
    a, b = np.meshgrid(np.arange(columns), np.arange(fibers), indexing="ij")
    psi = 2.0 * np.pi * (a + shift_columns) / columns
    phi2 = 2.0 * np.pi * (b + a * lift + shift_fibers) / fibers
    return np.column_stack([c * np.exp(1j * (psi + phi2)).ravel(), s * np.exp(1j * phi2).ravel()])


def sphere_grid(resolution, n=1):
    """Rings of Hopf coordinates xi = (cos(theta) e^{i phi1}, sin(theta) e^{i phi2}).

    resolution = (m_theta, m_horizontal, m_fiber). theta is cut into m_theta
    rings of equal width. Ring k carries round(m_horizontal cos(theta_k)
    sin(theta_k)) horizontal columns of m_fiber nodes each, so cells have width
    pi/(2 m_theta) across rings, 2 pi/m_horizontal along the contact plane and
    2 pi/m_fiber along the fiber; m_horizontal = m_fiber = 4 m_theta gives
    isotropic cells. Ring phases are shifted by golden-ratio fractions of a
    cell, and each ring carries its exact measure, so the total is 16 pi^2 at
    every resolution.
    """
    if n != 1:
        raise DomainError(f"sphere grids are available for n=1 only, got n={n}")
    m_theta, m_horizontal, m_fiber = _check_resolution(resolution, 3, "sphere")

    edges = np.linspace(0.0, 0.5 * np.pi, m_theta + 1)
    theta = 0.5 * (edges[:-1] + edges[1:])
    # integral de cos(theta) sin(theta) d(theta) sobre cada anel
    ring_measure = 0.5 * np.diff(np.sin(edges) ** 2)

    xi_parts, weight_parts = [], []
    for k, (th, measure) in enumerate(zip(theta, ring_measure)):
        columns = _ring_count(m_horizontal, np.cos(th) * np.sin(th))
        xi_parts.append(_ring_nodes(th, columns, m_fiber,
                                    (k * GOLDEN_TILT) % 1.0, (k * SILVER_SHIFT) % 1.0))
        # medida do toro (2 pi)^2 repartida igualmente; fator 2^{2n+1} n! = 8
        node_weight = 8.0 * measure * (2.0 * np.pi) ** 2 / (columns * m_fiber)
        weight_parts.append(np.full(columns * m_fiber, node_weight))

    grid = QuadratureGrid(kind="sphere", n=1, weights=np.concatenate(weight_parts),
                          resolution=(m_theta, m_horizontal, m_fiber), xi=np.concatenate(xi_parts))
    logger.info(f"Malha esférica {grid.resolution}: N={grid.size}, volume={grid.total_weight:.6f}")
    return grid


def _simplex_rule(dim, m):
    """Collapsed Gauss-Legendre rule on {s >= 0, sum(s) <= 1} in R^dim."""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = _gauss_legendre(m, 0.0, 1.0)
    points, weights = [], []
    for idx in itertools.product(range(m), repeat=dim):
        s, jac, rest = [], 1.0, 1.0
        for k in idx:
            s.append(rest * x[k])
            jac *= rest * w[k]
            rest -= s[-1]
        points.append(s)
        weights.append(jac)
    return np.array(points), np.array(weights)


def _unit_directions(s, w_s, n, n_phase):
    moduli = np.sqrt(np.column_stack([s, 1.0 - s.sum(axis=1)]))
    phi, w_phi = _periodic(n_phase)
    phases = np.array(list(itertools.product(phi, repeat=n)))
    w_phases = np.prod(np.array(list(itertools.product(w_phi, repeat=n))), axis=1)

    # direção unitária em C^n: z_j = sqrt(s_j) e^{i phi_j}, d(sigma) = 2^{1-n} ds dphi
    directions = (moduli[:, None, :] * np.exp(1j * phases)[None, :, :]).reshape(-1, n)
    w_dir = (2.0 ** (1 - n)) * (w_s[:, None] * w_phases[None, :]).ravel()
    return directions, w_dir


def _ball_times_interval(r, w_r, t, w_t, n, n_phase, n_simplex):
    """Product rule on {|z| in r-panel} x {t in t-panel}; w_r already includes r^{2n-1}.

    n_phase is a single phase count or one count per radial node.
    """
    s, w_s = _simplex_rule(n - 1, n_simplex)
    counts = np.broadcast_to(np.asarray(n_phase, dtype=int), r.shape)
    cache = {}
    z_parts, w_parts = [], []
    for k, (radius, weight, m) in enumerate(zip(r, w_r, counts)):
        if m not in cache:
            cache[m] = _unit_directions(s, w_s, n, int(m))
        directions, w_dir = cache[m]
        # giro de fase próprio de cada anel, em fração áurea do passo
        turn = np.exp(2j * np.pi * ((k * GOLDEN_TILT) % 1.0) / m)
        z_parts.append(radius * turn * directions)
        w_parts.append(weight * w_dir)
    z = np.concatenate(z_parts)
    w_z = np.concatenate(w_parts)

    z_all = np.repeat(z, t.size, axis=0)
    t_all = np.tile(t, z.shape[0])
    w_all = np.repeat(w_z, t.size) * np.tile(w_t, z.shape[0])
    return z_all, t_all, w_all


def _haar_factor(n):
    return 2.0 ** (2 * n) * math.factorial(n)


def cylinder_volume(R, n=1):
    """dV_0-volume of Sigma_R = {|z| < R, |t| < R^2}: 2^{2n+1} pi^n R^Q."""
    return 2.0 ** (2 * n + 1) * math.pi ** n * R ** (2 * n + 2)


def _geometric_panels(lo, hi, first, ratio):
    edges = [lo]
    edge = first
    while edge < hi * (1.0 - 1e-12):
        edges.append(edge)
        edge *= ratio
    edges.append(hi)
    return list(zip(edges[:-1], edges[1:]))


def _panel_rule(panels, m):
    nodes, weights = zip(*(_gauss_legendre(m, lo, hi) for lo, hi in panels))
    return np.concatenate(nodes), np.concatenate(weights)


def _tangent_panels(scale, extent, count):
    """Edges scale*tan(k h) with h = (pi/2)/count, cut at extent.

    Widths grow like h*scale*(1 + (x/scale)^2). Grids with the same scale and
    count share every panel below the smaller extent.
    """
    step = 0.5 * math.pi / count
    panels = max(1, math.ceil(math.atan(extent / scale) / step - 1e-9))
    edges = scale * np.tan(step * np.arange(panels + 1))
    edges[-1] = extent
    return list(zip(edges[:-1], edges[1:]))


def _mirrored(x, w):
    return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w])


def cylinder_grid(R, resolution, n=1, core=None):
    """Rule on Sigma_R graded toward the origin at the scale `core` (R by default).

    Radial panels have edges core*tan(k pi/(2 n_r)) and carry n Gauss nodes each;
    the t-axis gets midpoint panels with edges core^2*tan(k pi/(2 n_t)) on each
    side of 0. Ring k carries about 2 pi r_k / (radial spacing) phases, between
    MIN_RING_PHASES and n_phase. Cells near the origin then have width
    ~core/n_r in z and ~core^2/n_t in t, constants are integrated exactly, and
    for a fixed core a larger R only appends outer panels.
    """
    if not R > 0:
        raise DomainError(f"cylinder radius R must be positive, got {R}")
    core = float(R if core is None else core)
    if not core > 0:
        raise DomainError(f"core scale must be positive, got {core}")
    n_r, n_phase, n_t, n_simplex = _check_resolution(resolution, 4, "cylinder")

    r_panels = _tangent_panels(core, R, n_r)
    r, w_r = _panel_rule(r_panels, n)
    spacing = np.repeat([(hi - lo) / n for lo, hi in r_panels], n)
    phases = np.clip(np.rint(2.0 * np.pi * r / spacing), MIN_RING_PHASES, n_phase).astype(int)

    t, w_t = _mirrored(*_panel_rule(_tangent_panels(core * core, R * R, n_t), 1))
    z, t_all, w = _ball_times_interval(r, w_r * r ** (2 * n - 1), t, w_t, n, phases, n_simplex)

    grid = QuadratureGrid(kind="cylinder", n=n, weights=_haar_factor(n) * w,
                          resolution=(n_r, n_phase, n_t, n_simplex), z=z, t=t_all,
                          region={"R": float(R), "core": core})
    logger.info(f"Malha cilíndrica R={R:g} núcleo={core:g} {grid.resolution}: N={grid.size}")
    return grid


def cylinder_shell_grid(R_inner, R_outer, resolution, n=1):
    """Product rule on Sigma_{R_outer} minus Sigma_{R_inner}, dyadic panels in |z| and |t|."""
    if not 0 < R_inner < R_outer:
        raise DomainError(f"shell needs 0 < R_inner < R_outer, got {R_inner}, {R_outer}")
    n_r, n_phase, n_t, n_simplex = _check_resolution(resolution, 4, "cylinder")

    # bloco A: |z| < R_in, R_in^2 < |t| < R_out^2
    r_a, w_a = _gauss_legendre(n_r, 0.0, R_inner)
    t_a, wt_a = _mirrored(*_panel_rule(_geometric_panels(R_inner ** 2, R_outer ** 2, 4.0 * R_inner ** 2, 4.0), n_t))
    block_a = _ball_times_interval(r_a, w_a * r_a ** (2 * n - 1), t_a, wt_a, n, n_phase, n_simplex)

    # bloco B: R_in < |z| < R_out, |t| < R_out^2
    r_b, w_b = _panel_rule(_geometric_panels(R_inner, R_outer, 2.0 * R_inner, 2.0), n_r)
    t_b, wt_b = _mirrored(*_panel_rule(_geometric_panels(0.0, R_outer ** 2, R_inner ** 2, 4.0), n_t))
    block_b = _ball_times_interval(r_b, w_b * r_b ** (2 * n - 1), t_b, wt_b, n, n_phase, n_simplex)

    z = np.concatenate([block_a[0], block_b[0]])
    t = np.concatenate([block_a[1], block_b[1]])
    w = np.concatenate([block_a[2], block_b[2]])
    return QuadratureGrid(kind="cylinder", n=n, weights=_haar_factor(n) * w,
                          resolution=(n_r, n_phase, n_t, n_simplex), z=z, t=t,
                          region={"R_inner": float(R_inner), "R_outer": float(R_outer)})


def grid_from_points(points, weights):
    weights = np.asarray(weights, dtype=float)
    if len(points) != weights.size:
        raise ShapeError(f"{len(points)} nodes but {weights.size} weights")
    if np.any(weights <= 0):
        raise DomainError("quadrature weights must be positive")
    if all(isinstance(p, SpherePoint) for p in points):
        return QuadratureGrid(kind="sphere", n=points[0].n, weights=weights,
                              xi=np.array([p.xi for p in points]))
    if all(isinstance(p, HPoint) for p in points):
        return QuadratureGrid(kind="cylinder", n=points[0].n, weights=weights,
                              z=np.array([p.z for p in points]), t=np.array([p.t for p in points]))
    raise DomainError("nodes must be all SpherePoint or all HPoint")


def weighted_grid(weights):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ShapeError(f"weights must be a non-empty vector, got shape {weights.shape}")
    if np.any(weights <= 0):
        raise DomainError("quadrature weights must be positive")
    return QuadratureGrid(kind="discrete", n=0, weights=weights)


# --- núcleos ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelSpec:
    kind: str = "pure_singular"
    mass: object = None
    c_w: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DomainError(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.kind == "pure_singular" and (self.mass is not None or self.c_w != 0.0):
            raise DomainError("mass and c_w apply to green_model kernels only")
        if self.kind == "green_model" and self.c_w < 0:
            raise DomainError(f"remainder coefficient c_w must be >= 0, got {self.c_w}")

    def mass_values(self, size):
        if self.mass is None:
            return np.zeros(size)
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim == 0:
            return np.full(size, float(mass))
        if mass.shape != (size,):
            raise ShapeError(f"mass needs one value per node ({size}), got shape {mass.shape}")
        return mass

    def describe(self):
        mass = self.mass
        if mass is not None and np.ndim(mass) > 0:
            mass = {"per_node": True, "min": float(np.min(mass)), "max": float(np.max(mass))}
        return {"kind": self.kind, "mass": mass, "c_w": self.c_w}


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    spec: KernelSpec
    grid: QuadratureGrid

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (self.grid.size, self.grid.size):
            raise ShapeError(f"kernel shape {entries.shape} does not match grid size {self.grid.size}")
        if not np.all(np.isfinite(entries)):
            raise KernelAssemblyError("kernel entries must be finite")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def size(self):
        return self.grid.size

    def action(self, f):
        """(K f)_i = sum_j K_ij f_j w_j."""
        return self.entries @ (np.asarray(f) * self.grid.weights)

    def transpose_action(self, f):
        return self.entries.T @ (np.asarray(f) * self.grid.weights)

    def scaled(self, factor):
        return KernelMatrix(self.entries * factor, self.spec, self.grid)


def kernel_from_matrix(entries, grid, spec=None):
    entries = np.asarray(entries, dtype=float)
    if np.any(entries < 0):
        logger.warning("Núcleo explícito com entradas negativas")
    return KernelMatrix(entries, spec or KernelSpec(), grid)


def _kernel_block(grid, spec, params, rows, mass):
    index = np.arange(grid.size)[rows]
    rho = grid.distance_block(index)
    diag = (np.arange(index.size), index)
    rho[diag] = 1.0  # placeholder, diagonal zerada abaixo

    if spec.kind == "pure_singular":
        block = rho ** params.kernel_exponent
    else:
        base = rho ** (-2.0 * params.n) + mass[index, None] + spec.c_w * rho
        base[diag] = 1.0
        bad = np.argwhere(base <= 0)
        if bad.size:
            i, j = bad[0]
            pair = (int(index[i]), int(j))
            raise KernelAssemblyError(
                f"green_model base is not positive at pair {pair}: {base[i, j]:g}", pair=pair)
        block = base ** params.green_exponent

    block[diag] = 0.0
    if not np.all(np.isfinite(block)):
        i, j = np.argwhere(~np.isfinite(block))[0]
        pair = (int(index[i]), int(j))
        raise KernelAssemblyError(f"kernel entry at {pair} is not finite (coincident nodes?)", pair=pair)
    return block


def _row_blocks(N, block_size):
    return [slice(start, min(start + block_size, N)) for start in range(0, N, block_size)]


def _check_kernel_inputs(grid, spec, params):
    if grid.kind == "discrete":
        raise DomainError("discrete grids have no geometry; use kernel_from_matrix")
    if grid.n != params.n:
        raise DomainError(f"grid has n={grid.n} but params have n={params.n}")


def assemble_kernel(grid, spec, params, threads=1, block_size=DEFAULT_BLOCK_SIZE, progress=False):
    _check_kernel_inputs(grid, spec, params)
    N = grid.size
    mass = spec.mass_values(N)
    entries = np.empty((N, N))

    def fill(rows):
        entries[rows] = _kernel_block(grid, spec, params, rows, mass)

    blocks = _row_blocks(N, block_size)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        list(tqdm(pool.map(fill, blocks), total=len(blocks), disable=not progress,
                  desc="montando núcleo"))

    logger.info(f"Núcleo {spec.kind} montado: N={N}, alpha={params.alpha:g}")
    return KernelMatrix(entries, spec, grid)


def apply_kernel_blockwise(grid, spec, params, f, transpose=False, threads=1,
                           block_size=DEFAULT_BLOCK_SIZE, progress=False, rows=None):
    """sum_j K_ij f_j w_j (or the transposed action) without storing the N x N matrix.

    With `rows`, only those entries of K f are computed, in the order given.
    """
    _check_kernel_inputs(grid, spec, params)
    N = grid.size
    f = np.asarray(f, dtype=float)
    if f.shape != (N,):
        raise ShapeError(f"function has {f.size} values for a grid of {N} nodes")
    if rows is not None and transpose:
        raise DomainError("the transposed action needs every row of the kernel")
    mass = spec.mass_values(N)
    fw = f * grid.weights

    targets = np.arange(N) if rows is None else np.asarray(rows, dtype=int).ravel()
    positions = _row_blocks(targets.size, block_size)

    def work(position):
        block = _kernel_block(grid, spec, params, targets[position], mass)
        if transpose:
            return position, block.T @ fw[position]
        return position, block @ fw

    result = np.zeros(N if transpose else targets.size)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        # a soma em ordem fixa de blocos mantém o resultado determinístico
        for position, part in tqdm(pool.map(work, positions), total=len(positions),
                                   disable=not progress, desc="aplicando núcleo"):
            if transpose:
                result += part
            else:
                result[position] = part
    return result
