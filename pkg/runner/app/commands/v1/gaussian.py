"""
Subcommands on the Gaussian closed form: riccati, trajectory, ensemble.
"""

import logging

import numpy as np

from qfilter.errors import InvalidParameter
from qfilter.ensemble import run_ensemble
from qfilter.gaussian_filter import initial_from_packet, record_indices, simulate_trajectory
from qfilter.noise import wiener_path
from qfilter.riccati import (
    asymptotic_dispersions,
    free_spreading_width,
    integrate_riccati,
    omega_analytic_series,
    omega_stationary,
    relaxation_rate,
)

from app.core.context import CommandContext
from app.io.csv_io import write_table

logger = logging.getLogger(__name__)

RICCATI_DEVIATION_TOL = 1e-6
STATIONARY_TOL = 1e-9
FREE_SPREADING_RTOL = 1e-8
HEISENBERG_SLACK = 1e-12
# Rounding allowance where the ensemble spread is exactly zero (lambda = 0)
EXACT_SLACK = 1e-9
# Horizon of the riccati run in units of the relaxation time
WATCHDOG_RELAXATIONS = 40.0


def riccati_command(ctx: CommandContext) -> None:
    """RK4 against the closed form; checks convergence to the stationary width."""
    cfg = ctx.config
    params = cfg.params
    omega0 = 1.0 / (2.0 * cfg.packet.sigma_q2)
    horizon = cfg.run.t_end
    if params.lam > 0:
        horizon = max(horizon, WATCHDOG_RELAXATIONS / relaxation_rate(params))
    logger.info(f"Riccati flow: omega0={omega0:.6g}, horizon={horizon:.6g}, dt={cfg.run.dt:g}")

    rk4 = integrate_riccati(omega0, params, horizon, cfg.run.dt)
    analytic = omega_analytic_series(rk4.t_grid, omega0, params)
    deviation = np.abs(rk4.omega_series - analytic)

    header = ["t", "re_omega", "im_omega", "tau_q2", "tau_p2", "re_omega_analytic", "im_omega_analytic", "deviation"]
    table = np.column_stack([
        rk4.t_grid,
        rk4.omega_series.real,
        rk4.omega_series.imag,
        rk4.tau_q2,
        rk4.tau_p2(params),
        analytic.real,
        analytic.imag,
        deviation,
    ])
    idx = record_indices(len(rk4) - 1, cfg.outputs.every)
    path = write_table(ctx.output("riccati.csv"), header, table[idx])
    ctx.record.add_file(path, ctx.out_dir)

    max_dev = float(np.max(deviation))
    ctx.check("max_deviation", max_dev, RICCATI_DEVIATION_TOL, max_dev <= RICCATI_DEVIATION_TOL)

    final = complex(rk4.omega_series[-1])
    if params.lam > 0:
        alpha = omega_stationary(params).omega
        distance = max(abs(final.real - alpha.real), abs(final.imag - alpha.imag))
        ctx.check("stationary_distance", distance, STATIONARY_TOL, distance < STATIONARY_TOL)
        tau_q2_inf, tau_p2_inf = asymptotic_dispersions(params)
        ctx.note("tau_q2_limit", float(tau_q2_inf))
        ctx.note("tau_p2_limit", float(tau_p2_inf))
    else:
        expected = free_spreading_width(rk4.t_grid, cfg.packet.sigma_q2, params)
        rel = float(np.max(np.abs(rk4.tau_q2 - expected) / expected))
        ctx.check("free_spreading_rel_error", rel, FREE_SPREADING_RTOL, rel <= FREE_SPREADING_RTOL)


def trajectory_command(ctx: CommandContext) -> None:
    """One filtered trajectory; the w route is always propagated as a cross-check."""
    cfg = ctx.config
    params = cfg.params
    n_steps = ctx.n_steps()
    init = initial_from_packet(cfg.packet.q, cfg.packet.p, cfg.packet.sigma_q2, params)
    noise = wiener_path(cfg.run.dt, n_steps, params.dim, cfg.run.seed)
    record = simulate_trajectory(init, noise, params, record_w=True)

    idx = record_indices(n_steps, cfg.outputs.every)
    header, table = record.to_table()
    path = write_table(ctx.output("trajectory.csv"), header, table[idx])
    ctx.record.add_file(path, ctx.out_dir)

    if cfg.outputs.emit_w:
        w = np.array([c.w for c in record.w_series])
        w_header = (
            ["t"]
            + [f"re_w_{j + 1}" for j in range(params.dim)]
            + [f"im_w_{j + 1}" for j in range(params.dim)]
        )
        w_table = np.column_stack([record.t_grid, w.real, w.imag])
        path = write_table(ctx.output("trajectory_w.csv"), w_header, w_table[idx])
        ctx.record.add_file(path, ctx.out_dir)

    product = record.tau_q2_series * record.tau_p2_series
    ratio = float(np.min(product) / (params.hbar ** 2 / 4.0))
    ctx.check("heisenberg_min_ratio", ratio, 1.0, ratio >= 1.0 - HEISENBERG_SLACK)
    ctx.note("dual_deviation", record.dual_deviation())


def _in_stderrs(diff: np.ndarray, stderr: np.ndarray) -> float:
    """Largest |diff| in standard errors; a zero spread counts as 0 only for a match up to rounding."""
    diff = np.abs(diff)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, diff / np.where(stderr > 0, stderr, 1.0), np.where(diff > EXACT_SLACK, np.inf, 0.0))
    return float(np.max(z))


def ensemble_command(ctx: CommandContext) -> None:
    """Ensemble statistics and the ballistic mean law at 3 standard errors."""
    cfg = ctx.config
    params = cfg.params
    if cfg.run.n_traj < 2:
        raise InvalidParameter("run.n_traj", f"ensemble needs >= 2 trajectories, got {cfg.run.n_traj}")
    init = initial_from_packet(cfg.packet.q, cfg.packet.p, cfg.packet.sigma_q2, params)
    stats = run_ensemble(
        init,
        params,
        dt=cfg.run.dt,
        t_end=cfg.run.t_end,
        n_traj=cfg.run.n_traj,
        base_seed=cfg.run.seed,
        record_every=cfg.outputs.every,
        workers=ctx.workers,
    )
    header, table = stats.to_table()
    path = write_table(ctx.output("ensemble.csv"), header, table)
    ctx.record.add_file(path, ctx.out_dir)

    checks = stats.ballistic_check(cfg.packet.q, cfg.packet.p, params)
    q_final = np.full(params.dim, cfg.packet.q) + stats.t_grid[-1] * cfg.packet.p / params.m
    q_z = _in_stderrs(stats.mean_qhat[-1] - q_final, stats.stderr_qhat[-1])
    p_z = _in_stderrs(stats.mean_phat[-1] - cfg.packet.p, stats.stderr_phat[-1])
    ctx.check("qhat_final_stderrs", q_z, 3.0, checks["qhat_final"])
    ctx.check("phat_final_stderrs", p_z, 3.0, checks["phat_final"])
    ctx.note("qhat_all_times_within_3_stderr", checks["qhat_all"])
    ctx.note("phat_all_times_within_3_stderr", checks["phat_all"])
    ctx.note("mean_tau_q2_final", float(stats.mean_tau_q2[-1]))


COMMANDS = {
    "riccati": riccati_command,
    "trajectory": trajectory_command,
    "ensemble": ensemble_command,
}
