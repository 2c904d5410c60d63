import argparse
import logging
import sys

import numpy as np
import pandas as pd

from analyses.conformal_covariance import conformal_covariance_check
from analyses.curvature_residual import (
    curvature_equation_residual,
    curvature_exponent,
    normalize_curvature_scale,
    phi_from_maximizer,
)
from analyses.hls_verification import run_hls_verification
from analyses.lower_bound import lower_bound_experiment
from analyses.mass_perturbation import mass_perturbation_experiment
from config import COMMANDS, RunConfig, resolve_threads
from data.data_loader import load_fixture
from data.discretization import KernelSpec, assemble_kernel, sphere_grid
from data.preprocess import random_positive_function
from geometry.numerics_core import extremal_norm_power, sharp_constant_DH
from solvers.extremal_solver import blowup_diagnostic, continuation, solve_subcritical
from utils.errors import ConvergenceError
from utils.helpers import format_ratio, save_csv, save_json

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
COVARIANCE_TOLERANCE = 1e-10


def _sphere_kernel(config, params, resolution=None):
    grid = sphere_grid(resolution or config.sphere_resolution, n=params.n)
    K = assemble_kernel(grid, KernelSpec(), params, threads=resolve_threads(config.threads),
                        progress=_progress())
    return K, grid


def _progress():
    return logging.getLogger().isEnabledFor(logging.INFO)


def _history_frame(result):
    history = result.history
    return pd.DataFrame({
        "iteration": np.arange(1, len(history["step"]) + 1),
        "quotient": history["quotient"][1:],
        "step": history["step"],
        "defect": history["defect"],
    })


def _blowup_or_none(result, grid, params):
    if not result.converged or grid.kind == "discrete":
        return None
    return blowup_diagnostic(result, grid, params).to_dict()


def run_constants(config, params):
    summary = {
        "n": params.n,
        "Q": params.Q,
        "alpha": params.alpha,
        "p_alpha": params.p_alpha,
        "q_alpha": params.q_alpha,
        "b_n": params.b_n,
        "D_H": sharp_constant_DH(params),
        "extremal_norm_power": extremal_norm_power(params),
    }
    print(f"D_H = {format_ratio(summary['D_H'], 15)}")
    print(f"p_alpha = {format_ratio(params.p_alpha, 15)}")
    print(f"q_alpha = {format_ratio(params.q_alpha, 15)}")
    return summary, None, True


def run_verify_hls(config, params):
    summary, tails = run_hls_verification(
        config.eps, config.R, config.eps_values, config.tail_ratios, config.cylinder_resolution,
        params, threads=resolve_threads(config.threads), progress=_progress())
    return summary, tails, True


def run_extremal_sub(config, params):
    if config.fixture:
        K, fixture_p = load_fixture(config.fixture)
        grid = K.grid
        p = config.p if config.p is not None else fixture_p
        result = solve_subcritical(K, grid, p, tol=config.tol, max_iter=config.max_iter)
    else:
        K, grid = _sphere_kernel(config, params)
        p = config.p if config.p is not None else config.resolved_schedule(params)[0]
        result = solve_subcritical(K, grid, p, tol=config.tol, max_iter=config.max_iter, params=params)

    print(f"D_{{M,p}}(p={format_ratio(p)}) = {format_ratio(result.D_estimate, 10)}")
    summary = {
        "grid": grid.describe(),
        "kernel": K.spec.describe(),
        "result": result.to_dict(),
        "blowup": _blowup_or_none(result, grid, params),
    }
    return summary, _history_frame(result), result.converged


def run_continuation(config, params):
    K, grid = _sphere_kernel(config, params)
    results = continuation(K, grid, config.resolved_schedule(params), tol=config.tol,
                           max_iter=config.max_iter, params=params, progress=_progress())
    final = results[-1]
    D_H = sharp_constant_DH(params)

    summary = {
        "grid": grid.describe(),
        "stages": [r.to_dict(include_f=False) for r in results],
        "final": final.to_dict(),
        "D_H": D_H,
        "relative_gap_to_D_H": (D_H - final.D_estimate) / D_H,
        "blowup": _blowup_or_none(final, grid, params),
    }
    stages = pd.DataFrame([r.to_dict(include_f=False) for r in results])
    print(f"Estimativa crítica: {format_ratio(final.D_estimate, 10)} (D_H = {format_ratio(D_H, 10)})")
    return summary, stages, all(r.converged for r in results)


def run_lower_bound(config, params):
    resolution = config.cylinder_resolution if config.manifold == "cylinder" else config.sphere_resolution
    quotient = lower_bound_experiment(config.eps, config.R, resolution, params, manifold=config.manifold,
                                      threads=resolve_threads(config.threads), progress=_progress())
    D_H = sharp_constant_DH(params)
    summary = {"manifold": config.manifold, "R_over_eps": config.R / config.eps,
               "quotient": quotient, "D_H": D_H, "ratio_to_D_H": quotient / D_H}
    print(f"Quociente truncado: {format_ratio(quotient, 10)}")
    return summary, None, True


def run_mass_experiment(config, params):
    record, stages = mass_perturbation_experiment(
        config.A0, config.c_w, params.alpha, config.sphere_resolution,
        schedule=config.resolved_schedule(params), tol=config.tol, max_iter=config.max_iter,
        threads=resolve_threads(config.threads), progress=_progress())
    print(f"delta = {format_ratio(record['delta'], 10)}")
    return record, stages, record["converged"]


def _choose_phi(config, grid, rng):
    if config.phi == "constant":
        return np.ones(grid.size)
    return random_positive_function(grid.size, rng)


def run_covariance_check(config, params):
    if config.phi == "maximizer":
        raise ValueError("covariance-check takes phi 'random' or 'constant'")
    K, grid = _sphere_kernel(config, params, config.check_resolution)
    rng = np.random.default_rng(config.seed)
    phi = _choose_phi(config, grid, rng)
    u = rng.normal(size=grid.size)
    residual = conformal_covariance_check(K, grid, phi, u, params)
    print(f"Resíduo de covariância: {residual:.3e}")
    summary = {"N": grid.size, "residual": residual, "within_tolerance": bool(residual <= COVARIANCE_TOLERANCE)}
    return summary, None, True


def run_curvature_residual(config, params):
    K, grid = _sphere_kernel(config, params)
    rng = np.random.default_rng(config.seed)
    converged = True
    if config.phi == "maximizer":
        # ponto final da continuação levado a phi = f^{p-1}
        final = continuation(K, grid, config.resolved_schedule(params), tol=config.tol,
                             max_iter=config.max_iter, params=params, progress=_progress())[-1]
        phi = phi_from_maximizer(final.f, final.p)
        converged = final.converged
    else:
        phi = _choose_phi(config, grid, rng)

    residual = curvature_equation_residual(K, grid, phi, params)
    scaled = normalize_curvature_scale(K, phi, params)
    relative = residual / float(np.max(scaled ** curvature_exponent(params)))
    print(f"Resíduo da equação de curvatura: {residual:.6e} (relativo {relative:.3e})")
    summary = {"phi": config.phi, "N": grid.size, "residual": residual, "relative_residual": relative}
    return summary, None, converged


HANDLERS = {
    "constants": run_constants,
    "verify-hls": run_verify_hls,
    "extremal-sub": run_extremal_sub,
    "continuation": run_continuation,
    "lower-bound": run_lower_bound,
    "mass-experiment": run_mass_experiment,
    "covariance-check": run_covariance_check,
    "curvature-residual": run_curvature_residual,
}


def dispatch(config):
    """Validate, run the command, write <output>/<command>.json (and .csv); return the exit status."""
    try:
        params = config.validate()
        summary, table, converged = HANDLERS[config.command](config, params)
        summary = {"command": config.command, "config": config.to_dict(), **summary}
        save_json(summary, f"{config.command}.json", config.output)
        if table is not None:
            save_csv(table, f"{config.command}.csv", config.output)
        if config.strict and not converged:
            raise ConvergenceError(f"{config.command}: solver did not converge (strict mode)")
    except ConvergenceError as e:
        logging.error(str(e))
        print(f"erro: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValueError as e:
        logging.error(f"Configuração inválida: {e}")
        print(f"erro: {e}", file=sys.stderr)
        return EXIT_INVALID

    logging.info(f"Comando {config.command} concluído.")
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--output", help="directory for the JSON/CSV artifacts")
    common.add_argument("--threads", type=int, help="worker threads (default: $HLS_THREADS or all cores)")
    common.add_argument("--strict", action="store_true", default=None,
                        help="exit with status 3 when a solver does not converge")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--sphere-resolution", dest="sphere_resolution", type=int, nargs=3)
    common.add_argument("--check-resolution", dest="check_resolution", type=int, nargs=3)
    common.add_argument("--cylinder-resolution", dest="cylinder_resolution", type=int, nargs=4)
    common.add_argument("--eps", type=float)
    common.add_argument("--R", type=float)
    common.add_argument("--eps-values", dest="eps_values", type=float, nargs="+")
    common.add_argument("--tail-ratios", dest="tail_ratios", type=float, nargs="+")
    common.add_argument("--p", type=float)
    common.add_argument("--p-schedule", dest="p_schedule", type=float, nargs="+")
    common.add_argument("--A0", type=float)
    common.add_argument("--c-w", dest="c_w", type=float)
    common.add_argument("--manifold", choices=("cylinder", "sphere"))
    common.add_argument("--fixture")
    common.add_argument("--phi", choices=("random", "constant", "maximizer"))
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(description="HLS constants, extremals and experiments on H^n and S^{2n+1}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub.add_parser(command, parents=[common])
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")

    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "quiet")}
    try:
        config = RunConfig.from_sources(args.command, args.config, overrides)
    except (OSError, ValueError, TypeError) as e:
        print(f"erro: {e}", file=sys.stderr)
        return EXIT_INVALID

    logging.info(f"Iniciando o comando {config.command}.")
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
