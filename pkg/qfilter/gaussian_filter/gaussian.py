"""
Gaussian filter: propagation of the posterior means and width.

The posterior means follow the Hamilton-Langevin equations driven by the
innovation dQ~,

    dqhat = phat/m dt + ((lambda/2)^(1/2) / Re omega) dQ~
    dphat = -hbar ((lambda/2)^(1/2) Im omega / Re omega) dQ~

while omega follows the deterministic Riccati flow. The osmotic-velocity
coefficient w is propagated independently from the output record dQ,

    dw + (i hbar / m) omega w dt = (lambda/2)^(1/2) (hbar/m) dQ

and serves as a second implementation of the same filter.

Time stepping is Euler-Maruyama with all coefficients taken at the step
start (Ito convention); omega advances by one RK4 step per step.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from qfilter.errors import BlowUp, InvalidParameter, NonNormalizable, ShapeMismatch
from qfilter.noise import NoiseKind, NoisePath, innovation_to_output
from qfilter.posterior import (
    ComplexWidth,
    GaussianPosterior,
    PhysParams,
    WaveCoefficient,
    as_omega,
    reconstruct_qp,
)
from qfilter.riccati import rk4_step

logger = logging.getLogger(__name__)


@dataclass
class TrajectoryRecord:
    """
    One filtered trajectory: the posterior state at every step.

    `w_series`, when present, is the independently propagated osmotic
    coefficient; reconstruct_qp(w[k], omega[k]) tracks (qhat[k], phat[k])
    to the Euler-Maruyama discretization error (see dual_deviation).
    """
    params: PhysParams
    seed: int
    t_grid: np.ndarray
    states: List[GaussianPosterior]
    w_series: Optional[List[WaveCoefficient]] = None

    @property
    def qhat_series(self) -> np.ndarray:
        return np.array([s.qhat for s in self.states])

    @property
    def phat_series(self) -> np.ndarray:
        return np.array([s.phat for s in self.states])

    @property
    def omega_series(self) -> np.ndarray:
        return np.array([s.omega.omega for s in self.states], dtype=complex)

    @property
    def tau_q2_series(self) -> np.ndarray:
        return 1.0 / (2.0 * self.omega_series.real)

    @property
    def tau_p2_series(self) -> np.ndarray:
        omega = self.omega_series
        return self.params.hbar ** 2 * np.abs(omega) ** 2 / (2.0 * omega.real)

    def reconstructed_qp(self) -> Tuple[np.ndarray, np.ndarray]:
        """(qhat, phat) series recovered from the w route."""
        if self.w_series is None:
            raise InvalidParameter("record_w", "trajectory was simulated without the w route")
        pairs = [reconstruct_qp(w, s.omega, self.params) for w, s in zip(self.w_series, self.states)]
        return np.array([q for q, _ in pairs]), np.array([p for _, p in pairs])

    def dual_deviation(self) -> float:
        """Max absolute difference between the (qhat, phat) and w routes."""
        q_w, p_w = self.reconstructed_qp()
        return float(max(np.max(np.abs(q_w - self.qhat_series)), np.max(np.abs(p_w - self.phat_series))))

    def to_table(self) -> Tuple[List[str], np.ndarray]:
        """CSV table: t, qhat_1..dim, phat_1..dim, re_omega, im_omega, tau_q2, tau_p2."""
        dim = self.params.dim
        header = (
            ["t"]
            + [f"qhat_{j + 1}" for j in range(dim)]
            + [f"phat_{j + 1}" for j in range(dim)]
            + ["re_omega", "im_omega", "tau_q2", "tau_p2"]
        )
        omega = self.omega_series
        table = np.column_stack([
            self.t_grid,
            self.qhat_series,
            self.phat_series,
            omega.real,
            omega.imag,
            self.tau_q2_series,
            self.tau_p2_series,
        ])
        return header, table


# =============================================================================
# Initial condition and single steps
# =============================================================================

def initial_from_packet(
    q, p, sigma_q2: float, params: PhysParams
) -> Tuple[GaussianPosterior, WaveCoefficient]:
    """
    Filter state for a minimum-uncertainty Gaussian packet.

    omega(0) = 1/(2 sigma_q2) is real; w(0) = (hbar / 2 m sigma_q2) q + (i/m) p.
    Scalar q or p is applied to every component.
    """
    if not sigma_q2 > 0:
        raise InvalidParameter("sigma_q2", f"must be > 0, got {sigma_q2}")
    q = np.broadcast_to(np.asarray(q, dtype=float), (params.dim,)).copy()
    p = np.broadcast_to(np.asarray(p, dtype=float), (params.dim,)).copy()
    omega0 = ComplexWidth(complex(1.0 / (2.0 * sigma_q2)))
    state = GaussianPosterior(t=0.0, qhat=q, phat=p, omega=omega0)
    w0 = (params.hbar / (2.0 * params.m * sigma_q2)) * q + (1j / params.m) * p
    return state, WaveCoefficient(w0)


def noise_gains(omega: complex, params: PhysParams) -> Tuple[float, float]:
    """Diffusion coefficients of (qhat, phat) for a given width."""
    s = np.sqrt(params.lam / 2.0)
    gain_q = s / omega.real
    gain_p = -params.hbar * s * omega.imag / omega.real
    return gain_q, gain_p


def step_qp(state: GaussianPosterior, dQtilde, dt: float, params: PhysParams) -> GaussianPosterior:
    """
    One Euler-Maruyama step of the Hamilton-Langevin equations.

    Raises:
        BlowUp: if the RK4-advanced omega has Re <= 0
    """
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    omega = state.omega.omega
    gain_q, gain_p = noise_gains(omega, params)
    dQ = np.asarray(dQtilde, dtype=float).reshape(state.dim)

    qhat = state.qhat + (state.phat / params.m) * dt + gain_q * dQ
    phat = state.phat + gain_p * dQ

    omega_next = rk4_step(omega, params, dt)
    t_next = state.t + dt
    try:
        width = ComplexWidth(omega_next)
    except NonNormalizable:
        raise BlowUp(t_next)
    return GaussianPosterior(t=t_next, qhat=qhat, phat=phat, omega=width)


def step_w(w: WaveCoefficient, omega, dQ, dt: float, params: PhysParams) -> WaveCoefficient:
    """One Euler-Maruyama step of the w equation; driven by the OUTPUT increment dQ."""
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    value = as_omega(omega)
    w_arr = w.w
    drift = -(1j * params.hbar / params.m) * value * w_arr * dt
    kick = np.sqrt(params.lam / 2.0) * (params.hbar / params.m) * np.asarray(dQ, dtype=float).reshape(w_arr.shape)
    return WaveCoefficient(w_arr + drift + kick)


# =============================================================================
# Trajectories
# =============================================================================

def simulate_trajectory(
    init: Tuple[GaussianPosterior, WaveCoefficient],
    path: NoisePath,
    params: PhysParams,
    record_w: bool = False,
) -> TrajectoryRecord:
    """
    Run the filter over every increment of an innovation path.

    Args:
        init: (state, w) at t = 0, e.g. from initial_from_packet
        path: innovation increments, path.dim == params.dim
        params: physical parameters
        record_w: also propagate w from the derived output record

    Returns:
        TrajectoryRecord with n_steps + 1 states

    Raises:
        BlowUp: tagged with the step index
    """
    if path.kind is not NoiseKind.INNOVATION:
        raise InvalidParameter("kind", f"trajectory must be driven by an innovation path, got {path.kind.value}")
    if path.dim != params.dim:
        raise ShapeMismatch(f"path dim {path.dim} != params dim {params.dim}")

    state, w = init
    states = [state]
    for k in range(path.n_steps):
        try:
            state = step_qp(state, path.increments[k], path.dt, params)
        except BlowUp as e:
            logger.error(f"Gaussian filter blew up at step {k + 1} (seed {path.seed})")
            raise BlowUp(e.t, step=k + 1)
        states.append(state)

    w_series = None
    if record_w:
        qhat_starts = np.array([s.qhat for s in states[:-1]])
        output = innovation_to_output(path, qhat_starts, params)
        w_series = [w]
        for k in range(path.n_steps):
            w = step_w(w, states[k].omega, output.increments[k], path.dt, params)
            w_series.append(w)

    t_grid = np.array([s.t for s in states])
    record = TrajectoryRecord(params=params, seed=path.seed, t_grid=t_grid, states=states, w_series=w_series)
    logger.debug(f"Simulated trajectory seed={path.seed}: {path.n_steps} steps, record_w={record_w}")
    return record


def record_indices(n_steps: int, every: int) -> np.ndarray:
    """Indices 0, every, 2*every, ... always including the final step n_steps."""
    if every < 1:
        raise InvalidParameter("record_every", f"must be >= 1, got {every}")
    idx = np.arange(0, n_steps + 1, every)
    if idx[-1] != n_steps:
        idx = np.append(idx, n_steps)
    return idx


def omega_flow(omega0, params: PhysParams, n_steps: int, dt: float) -> np.ndarray:
    """omega at every step, advanced exactly as step_qp advances it."""
    omega = as_omega(omega0)
    series = np.empty(n_steps + 1, dtype=complex)
    series[0] = omega
    for k in range(n_steps):
        omega = rk4_step(omega, params, dt)
        if not omega.real > 0:
            raise BlowUp((k + 1) * dt, step=k + 1)
        series[k + 1] = omega
    return series


def propagate_batch(
    init: GaussianPosterior,
    increments: np.ndarray,
    dt: float,
    params: PhysParams,
    record_every: int = 1,
    omega_series: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Propagate many trajectories at once through the step_qp recurrence.

    All trajectories share omega(t), so the noise gains are computed once
    and the update is vectorised across trajectories. The arithmetic is
    the same as step_qp, term for term.

    Args:
        init: common initial state
        increments: innovation increments, shape (n_traj, n_steps, dim)
        dt: step size
        params: physical parameters
        record_every: record stride (the final step is always recorded)
        omega_series: precomputed omega_flow, length n_steps + 1

    Returns:
        (qhat, phat, idx): qhat and phat of shape (n_traj, len(idx), dim)
        at the recorded step indices idx
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3 or increments.shape[2] != params.dim:
        raise ShapeMismatch(f"increments must have shape (n_traj, n_steps, {params.dim}), got {increments.shape}")
    n_traj, n_steps, dim = increments.shape
    if omega_series is None:
        omega_series = omega_flow(init.omega, params, n_steps, dt)
    if len(omega_series) != n_steps + 1:
        raise ShapeMismatch(f"omega series has {len(omega_series)} entries, expected {n_steps + 1}")

    gains = [noise_gains(complex(w), params) for w in omega_series[:-1]]
    idx = record_indices(n_steps, record_every)
    q_rec = np.empty((n_traj, idx.size, dim))
    p_rec = np.empty((n_traj, idx.size, dim))

    qhat = np.broadcast_to(init.qhat, (n_traj, dim)).copy()
    phat = np.broadcast_to(init.phat, (n_traj, dim)).copy()
    slot = 0
    if idx[0] == 0:
        q_rec[:, 0], p_rec[:, 0] = qhat, phat
        slot = 1
    for k in range(n_steps):
        gain_q, gain_p = gains[k]
        dQ = increments[:, k, :]
        qhat = qhat + (phat / params.m) * dt + gain_q * dQ
        phat = phat + gain_p * dQ
        if slot < idx.size and idx[slot] == k + 1:
            q_rec[:, slot], p_rec[:, slot] = qhat, phat
            slot += 1
    return q_rec, p_rec, idx
