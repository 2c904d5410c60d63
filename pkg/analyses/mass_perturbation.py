"""Positive mass raises the critical quotient: green_model kernel vs pure_singular on S^3."""
import logging

import pandas as pd

from config import DEFAULT_MAX_ITER, DEFAULT_TOL, default_p_schedule
from data.discretization import KernelSpec, assemble_kernel, sphere_grid
from geometry.numerics_core import make_params
from solvers.extremal_solver import continuation, solve_subcritical
from utils.errors import DomainError

logger = logging.getLogger(__name__)


def _stage_rows(label, results):
    return [{"kernel": label, "p": r.p, "D": r.D_estimate, "iterations": r.iterations,
             "residual": r.residual, "converged": r.converged} for r in results]


def mass_perturbation_experiment(A0, c_w, alpha, resolution, schedule=None, tol=DEFAULT_TOL,
                                 max_iter=DEFAULT_MAX_ITER, threads=1, progress=False,
                                 pure_results=None, grid=None):
    """Compare the critical-limit quotients of the green_model (mass A0) and pure_singular kernels.

    Every green_model stage starts from the pure maximizer at the same p, so the
    mass quotient can only end above the pure one.
    """
    if not A0 >= 0:
        raise DomainError(f"mass A0 must be >= 0, got {A0}")
    params = make_params(1, alpha)
    schedule = list(schedule or default_p_schedule(params.q_alpha))
    grid = grid or sphere_grid(resolution, n=1)

    if pure_results is None:
        K_pure = assemble_kernel(grid, KernelSpec(), params, threads=threads, progress=progress)
        pure_results = continuation(K_pure, grid, schedule, tol=tol, max_iter=max_iter,
                                    params=params, progress=progress)

    K_mass = assemble_kernel(grid, KernelSpec("green_model", mass=A0, c_w=c_w), params,
                             threads=threads, progress=progress)
    mass_results = []
    for pure in pure_results:
        mass_results.append(solve_subcritical(K_mass, grid, pure.p, tol=tol, max_iter=max_iter,
                                              init=pure.f, params=params))

    quotient_pure = pure_results[-1].D_estimate
    quotient_mass = mass_results[-1].D_estimate
    delta = quotient_mass - quotient_pure
    logger.info(f"Massa A0={A0:g}: D_massa={quotient_mass:.10g}, D_puro={quotient_pure:.10g}, delta={delta:.3e}")

    record = {
        "A0": float(A0),
        "c_w": float(c_w),
        "alpha": float(alpha),
        "p_final": pure_results[-1].p,
        "quotient_mass": quotient_mass,
        "quotient_pure": quotient_pure,
        "delta": delta,
        "converged": bool(pure_results[-1].converged and mass_results[-1].converged),
    }
    stages = pd.DataFrame(_stage_rows("pure_singular", pure_results) + _stage_rows("green_model", mass_results))
    stages.insert(1, "A0", float(A0))
    return record, stages


def mass_sweep(A0_values, c_w, alpha, resolution, schedule=None, tol=DEFAULT_TOL,
               max_iter=DEFAULT_MAX_ITER, threads=1, progress=False):
    """One pure continuation shared by every mass value."""
    params = make_params(1, alpha)
    schedule = list(schedule or default_p_schedule(params.q_alpha))
    grid = sphere_grid(resolution, n=1)
    K_pure = assemble_kernel(grid, KernelSpec(), params, threads=threads, progress=progress)
    pure_results = continuation(K_pure, grid, schedule, tol=tol, max_iter=max_iter,
                                params=params, progress=progress)

    records = []
    for A0 in A0_values:
        record, _ = mass_perturbation_experiment(A0, c_w, alpha, resolution, schedule, tol, max_iter,
                                                 threads, progress, pure_results=pure_results, grid=grid)
        records.append(record)
    return pd.DataFrame(records)
