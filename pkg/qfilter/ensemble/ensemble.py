"""
Monte Carlo ensembles of filtered trajectories.

Trajectory i draws its noise from derive_seed(base_seed, i), so the set of
trajectories does not depend on how the work is split. Trajectories are
processed in fixed-size chunks (optionally on a process pool); each chunk
reduces to (count, mean, M2) and the chunks are merged in chunk-index
order, so the statistics are bit-identical for any worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from qfilter.errors import BlowUp, InvalidParameter
from qfilter.gaussian_filter import omega_flow, propagate_batch, record_indices
from qfilter.grid_sse import GridState, step_linear
from qfilter.noise import NoiseKind, derive_seed, wiener_path
from qfilter.posterior import GaussianPosterior, PhysParams, WaveCoefficient

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256
# Rounding allowance for the mean law when the spread vanishes (lambda = 0)
EXACT_SLACK = 1e-9


@dataclass
class EnsembleStats:
    n_traj: int
    t_grid: np.ndarray
    mean_qhat: np.ndarray          # (n_times, dim)
    mean_phat: np.ndarray
    var_qhat: np.ndarray
    var_phat: np.ndarray
    mean_tau_q2: np.ndarray        # (n_times,)
    stderr_qhat: np.ndarray
    stderr_phat: np.ndarray
    likelihood_mean: Optional[float] = None
    likelihood_stderr: Optional[float] = None

    def ballistic_check(self, q, p, params: PhysParams, n_sigma: float = 3.0) -> Dict[str, bool]:
        """
        Mean law: E qhat(t) = q + p t / m and E phat(t) = p, within n_sigma standard errors.

        Times where the standard error is zero (t = 0, or lambda = 0) compare up to rounding.
        """
        q = np.broadcast_to(np.asarray(q, dtype=float), (params.dim,))
        p = np.broadcast_to(np.asarray(p, dtype=float), (params.dim,))
        expected_q = q + np.outer(self.t_grid, p) / params.m
        q_ok = np.abs(self.mean_qhat - expected_q) <= n_sigma * self.stderr_qhat + EXACT_SLACK * (1.0 + np.abs(expected_q))
        p_ok = np.abs(self.mean_phat - p) <= n_sigma * self.stderr_phat + EXACT_SLACK * (1.0 + np.abs(p))
        return {
            "qhat_final": bool(np.all(q_ok[-1])),
            "phat_final": bool(np.all(p_ok[-1])),
            "qhat_all": bool(np.all(q_ok)),
            "phat_all": bool(np.all(p_ok)),
        }

    def to_table(self) -> Tuple[List[str], np.ndarray]:
        """t, mean_qhat_i, stderr_qhat_i, mean_phat_i, mean_tau_q2 [, likelihood_mean, likelihood_stderr]."""
        dim = self.mean_qhat.shape[1]
        header = (
            ["t"]
            + [f"mean_qhat_{j + 1}" for j in range(dim)]
            + [f"stderr_qhat_{j + 1}" for j in range(dim)]
            + [f"mean_phat_{j + 1}" for j in range(dim)]
            + ["mean_tau_q2"]
        )
        columns = [self.t_grid, self.mean_qhat, self.stderr_qhat, self.mean_phat, self.mean_tau_q2]
        if self.likelihood_mean is not None:
            header += ["likelihood_mean", "likelihood_stderr"]
            ones = np.ones_like(self.t_grid)
            columns += [self.likelihood_mean * ones, self.likelihood_stderr * ones]
        return header, np.column_stack(columns)


# =============================================================================
# Reduction helpers
# =============================================================================

def _partial_moments(samples: np.ndarray) -> Tuple[int, np.ndarray, np.ndarray]:
    """(count, mean, M2) over axis 0."""
    mean = np.mean(samples, axis=0)
    m2 = np.sum((samples - mean) ** 2, axis=0)
    return samples.shape[0], mean, m2


def _merge_moments(a: Tuple[int, np.ndarray, np.ndarray], b: Tuple[int, np.ndarray, np.ndarray]):
    n_a, mean_a, m2_a = a
    n_b, mean_b, m2_b = b
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    m2 = m2_a + m2_b + delta ** 2 * (n_a * n_b / n)
    return n, mean, m2


def _chunks(n_traj: int) -> List[Tuple[int, int]]:
    return [(start, min(start + CHUNK_SIZE, n_traj)) for start in range(0, n_traj, CHUNK_SIZE)]


def _fan_out(job: Callable, chunks: Sequence[Tuple[int, int]], workers: int) -> list:
    """Run job over chunks, results in chunk order."""
    if workers <= 1 or len(chunks) <= 1:
        return [job(chunk) for chunk in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, chunks))


def _n_steps(t_end: float, dt: float) -> int:
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    if t_end < 0:
        raise InvalidParameter("t_end", f"must be >= 0, got {t_end}")
    return int(round(t_end / dt))


# =============================================================================
# Gaussian-filter ensemble
# =============================================================================

def _ensemble_chunk(
    chunk: Tuple[int, int],
    init: GaussianPosterior,
    params: PhysParams,
    dt: float,
    n_steps: int,
    base_seed: int,
    omega_series: np.ndarray,
    record_every: int,
):
    start, stop = chunk
    increments = np.stack([
        wiener_path(dt, n_steps, params.dim, derive_seed(base_seed, i)).increments
        for i in range(start, stop)
    ])
    q_rec, p_rec, _ = propagate_batch(init, increments, dt, params, record_every, omega_series)
    logger.debug(f"Ensemble chunk [{start}, {stop}) done")
    return _partial_moments(q_rec), _partial_moments(p_rec)


def run_ensemble(
    init: Union[GaussianPosterior, Tuple[GaussianPosterior, WaveCoefficient]],
    params: PhysParams,
    dt: float,
    t_end: float,
    n_traj: int,
    base_seed: int,
    record_every: int = 1,
    workers: int = 1,
) -> EnsembleStats:
    """
    Statistics of n_traj independent Gaussian-filter trajectories.

    Args:
        init: initial state (or the (state, w) pair from initial_from_packet)
        params: physical parameters
        dt: step size
        t_end: horizon, rounded to round(t_end / dt) steps
        n_traj: number of trajectories (>= 2)
        base_seed: ensemble seed; trajectory i uses derive_seed(base_seed, i)
        record_every: statistics stride in steps
        workers: process count for the chunk fan-out

    Raises:
        BlowUp: tagged with a trajectory index
    """
    if isinstance(init, tuple):
        init = init[0]
    if n_traj < 2:
        raise InvalidParameter("n_traj", f"must be >= 2, got {n_traj}")
    n_steps = _n_steps(t_end, dt)
    if n_steps < 1:
        raise InvalidParameter("t_end", f"must be >= dt, got t_end={t_end}, dt={dt}")

    try:
        omega_series = omega_flow(init.omega, params, n_steps, dt)
    except BlowUp as e:
        raise e.tagged(0)

    job = partial(
        _ensemble_chunk,
        init=init,
        params=params,
        dt=dt,
        n_steps=n_steps,
        base_seed=base_seed,
        omega_series=omega_series,
        record_every=record_every,
    )
    chunks = _chunks(n_traj)
    logger.info(f"Running ensemble: {n_traj} trajectories x {n_steps} steps in {len(chunks)} chunks, workers={workers}")
    results = _fan_out(job, chunks, workers)

    q_stats, p_stats = results[0]
    for q_part, p_part in results[1:]:
        q_stats = _merge_moments(q_stats, q_part)
        p_stats = _merge_moments(p_stats, p_part)

    n, mean_q, m2_q = q_stats
    _, mean_p, m2_p = p_stats
    var_q = m2_q / (n - 1)
    var_p = m2_p / (n - 1)

    idx = record_indices(n_steps, record_every)
    omega = omega_series[idx]
    return EnsembleStats(
        n_traj=n,
        t_grid=dt * idx.astype(float),
        mean_qhat=mean_q,
        mean_phat=mean_p,
        var_qhat=var_q,
        var_phat=var_p,
        mean_tau_q2=1.0 / (2.0 * omega.real),
        stderr_qhat=np.sqrt(var_q / n),
        stderr_phat=np.sqrt(var_p / n),
    )


# =============================================================================
# Martingale check of the linear equation
# =============================================================================

def _martingale_chunk(
    chunk: Tuple[int, int], init: GridState, params: PhysParams, dt: float, n_steps: int, base_seed: int
) -> List[float]:
    start, stop = chunk
    values = []
    for i in range(start, stop):
        path = wiener_path(dt, n_steps, 1, derive_seed(base_seed, i), kind=NoiseKind.PRIOR)
        state = init
        for k in range(n_steps):
            state = step_linear(state, float(path.increments[k, 0]), dt, params)
        values.append(state.likelihood)
    logger.debug(f"Martingale chunk [{start}, {stop}) done")
    return values


def martingale_check(
    init: GridState,
    params: PhysParams,
    dt: float,
    t_end: float,
    n_traj: int,
    base_seed: int,
    workers: int = 1,
) -> Tuple[float, float]:
    """
    Mean and standard error of the terminal likelihood ||chi(T)||^2.

    The linear equation is driven by prior (reference-measure) Wiener
    records; under that measure the likelihood is a martingale, so the
    mean should lie within 3 standard errors of 1.
    """
    if n_traj < 2:
        raise InvalidParameter("n_traj", f"must be >= 2, got {n_traj}")
    n_steps = _n_steps(t_end, dt)
    if n_steps == 0:
        return 1.0, 0.0

    job = partial(_martingale_chunk, init=init, params=params, dt=dt, n_steps=n_steps, base_seed=base_seed)
    chunks = _chunks(n_traj)
    logger.info(f"Martingale check: {n_traj} linear trajectories x {n_steps} steps, workers={workers}")
    values = np.array([v for part in _fan_out(job, chunks, workers) for v in part])
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(values.size))
    logger.info(f"Martingale check: mean likelihood {mean:.6f} +- {stderr:.6f}")
    return mean, stderr
