"""
Posterior wave equation on a 1-D lattice.

Two equations are integrated with the same split step:

    nonlinear (normalized):   dpsi = [(i hbar/2m) psi'' - (lambda/4)(x - qhat)^2 psi] dt
                                     + (lambda/2)^(1/2) (x - qhat) psi dQ~
    linear (unnormalized):    dchi = [(i hbar/2m) chi'' - (lambda/4) x^2 chi] dt
                                     + (lambda/2)^(1/2) x chi dQ

Split step: half Crank-Nicolson kinetic step, pointwise stochastic
multiplier, half kinetic step, renormalize. The multiplier is the exact
Ito solution of the frozen local equation,

    exp{(lambda/2)^(1/2) (x - qhat) dQ~ - (lambda/2) (x - qhat)^2 dt}

(the Ito correction doubles the deterministic quadratic coefficient).
The linear equation keeps the squared norm of each step in a log-domain
likelihood accumulator before renormalizing.

Boundaries are Dirichlet-zero; a boundary-mass guard turns silent
aliasing into an error. The grid solver is 1-D only: for product initial
data the 3-D equation separates over Cartesian components.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from qfilter.errors import (
    BoundaryMassExceeded,
    InvalidParameter,
    NotNormalized,
    PacketOutOfDomain,
    ShapeMismatch,
)
from qfilter.noise import NoiseKind, NoisePath
from qfilter.posterior import PhysParams
from qfilter.riccati import asymptotic_dispersions, free_spreading_width

logger = logging.getLogger(__name__)

MIN_POINTS = 16
BOUNDARY_FRACTION = 0.05
BOUNDARY_MASS_LIMIT = 1e-6
NORM_TOLERANCE = 1e-10
PACKET_SIGMAS = 8.0

# 8th-order central stencils, offsets -4..4
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_points: int = 2048

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise InvalidParameter("grid.x_max", f"must exceed x_min ({self.x_min}), got {self.x_max}")
        if self.n_points < MIN_POINTS:
            raise InvalidParameter("grid.n_points", f"must be >= {MIN_POINTS}, got {self.n_points}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)


@dataclass(frozen=True)
class GridState:
    spec: GridSpec
    t: float
    amps: np.ndarray
    normalized: bool = True
    log_likelihood: float = 0.0    # log of the accumulated squared-norm factors
    raw_norm: float = 1.0          # lattice norm before the last renormalization

    def __post_init__(self):
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (self.spec.n_points,):
            raise ShapeMismatch(f"amps shape {amps.shape} != ({self.spec.n_points},)")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def likelihood(self) -> float:
        return float(np.exp(self.log_likelihood))

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2) * self.spec.dx)


@dataclass(frozen=True)
class Moments:
    t: float
    qhat: float
    phat: float
    tau_q2: float
    tau_p2: float
    cov_qp: float                  # symmetrized position-momentum covariance
    norm: float


# =============================================================================
# Construction and diagnostics
# =============================================================================

def init_grid(q: float, p: float, sigma_q2: float, spec: GridSpec, params: PhysParams) -> GridState:
    """
    Sample the Gaussian packet exp{-(x-q)^2/(4 sigma^2) + (i/hbar) p x} and
    renormalize it on the lattice.
    """
    if params.dim != 1:
        raise InvalidParameter("params.dim", "the grid solver is 1-D only")
    if not sigma_q2 > 0:
        raise InvalidParameter("sigma_q2", f"must be > 0, got {sigma_q2}")
    sigma = np.sqrt(sigma_q2)
    if q - PACKET_SIGMAS * sigma < spec.x_min or q + PACKET_SIGMAS * sigma > spec.x_max:
        raise PacketOutOfDomain(
            f"packet q={q}, sigma={sigma:.6g} needs [{q - PACKET_SIGMAS * sigma:.6g}, "
            f"{q + PACKET_SIGMAS * sigma:.6g}] inside [{spec.x_min}, {spec.x_max}]"
        )
    x = spec.x
    amps = np.exp(-((x - q) ** 2) / (4.0 * sigma_q2) + 1j * p * x / params.hbar)
    amps = amps / np.sqrt(np.sum(np.abs(amps) ** 2) * spec.dx)
    return GridState(spec=spec, t=0.0, amps=amps)


def auto_grid(q: float, p: float, sigma_q2: float, params: PhysParams, t_end: float, n_points: int = 2048) -> GridSpec:
    """
    Lab-frame domain around the ballistic centre q + p T / 2m.

    Half-width: 20 max(sigma_q, tau_q) plus the ballistic drift plus four
    standard deviations of the measurement-driven wander of qhat (momentum
    diffusion ~ hbar^2 lambda / 2 integrated twice).
    """
    sigma = np.sqrt(sigma_q2)
    drift = abs(p) * t_end / (2.0 * params.m)
    if params.lam > 0:
        tau = np.sqrt(asymptotic_dispersions(params)[0])
        gain_q = np.sqrt(params.hbar / params.m)
        gain_p = params.hbar * np.sqrt(params.lam / 2.0) / params.m
        var = gain_p ** 2 * t_end ** 3 / 3.0 + gain_p * gain_q * t_end ** 2 + gain_q ** 2 * t_end
        wander = 4.0 * np.sqrt(var)
    else:
        tau = np.sqrt(free_spreading_width(t_end, sigma_q2, params))
        wander = 0.0
    half = 20.0 * max(sigma, float(tau)) + drift + wander
    center = q + p * t_end / (2.0 * params.m)
    return GridSpec(x_min=center - half, x_max=center + half, n_points=n_points)


def position_mean(state: GridState) -> float:
    density = np.abs(state.amps) ** 2
    return float(np.sum(state.spec.x * density) * state.spec.dx)


def _derivative(amps: np.ndarray, stencil: np.ndarray, dx: float, order: int) -> np.ndarray:
    # zero padding outside the lattice matches the Dirichlet boundary
    return np.convolve(amps, stencil[::-1], mode="same") / dx ** order


def grid_moments(state: GridState, params: PhysParams) -> Moments:
    """
    Lattice quadrature of the posterior moments.

    Raises:
        NotNormalized: if the state is not normalized
    """
    dx = state.spec.dx
    norm = state.norm
    if not state.normalized or abs(norm - 1.0) > 1e-8:
        raise NotNormalized(f"state norm {norm:.12g} (normalized={state.normalized})")
    x = state.spec.x
    psi = np.asarray(state.amps)
    density = np.abs(psi) ** 2

    qhat = float(np.sum(x * density) * dx)
    tau_q2 = float(np.sum((x - qhat) ** 2 * density) * dx)

    d1 = _derivative(psi, _D1, dx, 1)
    d2 = _derivative(psi, _D2, dx, 2)
    overlap = np.conj(psi) * d1
    phat = float(params.hbar * np.sum(overlap).imag * dx)
    p2 = float(-(params.hbar ** 2) * np.sum(np.conj(psi) * d2).real * dx)
    tau_p2 = p2 - phat ** 2
    cov_qp = float(params.hbar * np.sum((x - qhat) * overlap).imag * dx)
    return Moments(t=state.t, qhat=qhat, phat=phat, tau_q2=tau_q2, tau_p2=tau_p2, cov_qp=cov_qp, norm=norm)


def effective_omega(moments: Moments, params: PhysParams) -> complex:
    """Width of the Gaussian with the same dispersion and covariance."""
    re = 1.0 / (2.0 * moments.tau_q2)
    im = -2.0 * re * moments.cov_qp / params.hbar
    return complex(re, im)


def l2_distance(a: GridState, b: GridState) -> float:
    if a.spec != b.spec:
        raise ShapeMismatch("states live on different lattices")
    return float(np.sqrt(np.sum(np.abs(a.amps - b.amps) ** 2) * a.spec.dx))


def snapshot_rows(state: GridState) -> Tuple[List[str], np.ndarray]:
    """Snapshot table: x, re_psi, im_psi, density."""
    psi = state.amps
    return ["x", "re_psi", "im_psi", "density"], np.column_stack([state.spec.x, psi.real, psi.imag, np.abs(psi) ** 2])


def _check_boundary(amps: np.ndarray, spec: GridSpec, t: float) -> None:
    edge = max(1, int(np.ceil(BOUNDARY_FRACTION * spec.n_points)))
    density = np.abs(amps) ** 2
    total = np.sum(density)
    outer = np.sum(density[:edge]) + np.sum(density[-edge:])
    if not total > 0 or outer > BOUNDARY_MASS_LIMIT * total:
        raise BoundaryMassExceeded(
            f"boundary mass fraction {outer / total if total > 0 else float('nan'):.3g} at t={t:.6g} "
            f"exceeds {BOUNDARY_MASS_LIMIT:g}; enlarge the domain"
        )


# =============================================================================
# Split step
# =============================================================================

@lru_cache(maxsize=32)
def _kinetic_operator(spec: GridSpec, hbar: float, m: float, dt: float) -> Tuple[np.ndarray, complex]:
    """Banded Crank-Nicolson matrix (I - beta L) for psi' = (i hbar / 2m) psi''."""
    beta = 1j * hbar * dt / (4.0 * m * spec.dx ** 2)
    n = spec.n_points
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = -beta
    ab[1, :] = 1.0 + 2.0 * beta
    ab[2, :-1] = -beta
    ab.setflags(write=False)
    return ab, beta


def kinetic_step(amps: np.ndarray, spec: GridSpec, params: PhysParams, dt: float) -> np.ndarray:
    """Crank-Nicolson free evolution over dt (unitary on the lattice)."""
    ab, beta = _kinetic_operator(spec, params.hbar, params.m, dt)
    rhs = (1.0 - 2.0 * beta) * amps
    rhs[1:] += beta * amps[:-1]
    rhs[:-1] += beta * amps[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _split_step(amps: np.ndarray, spec: GridSpec, params: PhysParams, dt: float, shift: float, dQ: float) -> np.ndarray:
    x = spec.x - shift
    multiplier = np.exp(np.sqrt(params.lam / 2.0) * x * dQ - 0.5 * params.lam * x ** 2 * dt)
    half = 0.5 * dt
    amps = kinetic_step(amps, spec, params, half)
    amps = amps * multiplier
    return kinetic_step(amps, spec, params, half)


def step_nonlinear(state: GridState, dQtilde: float, dt: float, params: PhysParams) -> GridState:
    """
    One split step of the normalized posterior equation driven by the innovation.

    qhat in the multiplier is the pre-step lattice mean (Ito convention).
    """
    if not state.normalized:
        raise NotNormalized("nonlinear step needs a normalized state")
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    qhat = position_mean(state)
    amps = _split_step(np.asarray(state.amps), state.spec, params, dt, qhat, float(dQtilde))
    raw_norm = float(np.sqrt(np.sum(np.abs(amps) ** 2) * state.spec.dx))
    t_next = state.t + dt
    if not raw_norm > 0:
        raise BoundaryMassExceeded(f"wave function vanished at t={t_next:.6g}")
    amps = amps / raw_norm
    _check_boundary(amps, state.spec, t_next)
    return replace(state, t=t_next, amps=amps, normalized=True, raw_norm=raw_norm)


def step_linear(state: GridState, dQ: float, dt: float, params: PhysParams) -> GridState:
    """
    One split step of the unnormalized equation driven by the output increment.

    The squared norm gained in the step is folded into the likelihood
    (log domain); the amplitudes are renormalized for numerical stability.
    """
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    amps = _split_step(np.asarray(state.amps), state.spec, params, dt, 0.0, float(dQ))
    raw_norm = float(np.sqrt(np.sum(np.abs(amps) ** 2) * state.spec.dx))
    t_next = state.t + dt
    if not raw_norm > 0:
        raise BoundaryMassExceeded(f"wave function vanished at t={t_next:.6g}")
    amps = amps / raw_norm
    _check_boundary(amps, state.spec, t_next)
    # without measurement the step is unitary and carries no likelihood
    gained = 2.0 * np.log(raw_norm) if params.lam > 0 else 0.0
    return replace(
        state,
        t=t_next,
        amps=amps,
        normalized=True,
        log_likelihood=state.log_likelihood + gained,
        raw_norm=raw_norm,
    )


# =============================================================================
# Trajectories on the lattice
# =============================================================================

@dataclass
class GridRecord:
    """Moment series of a lattice trajectory, with the co-evolved linear solution."""
    params: PhysParams
    seed: int
    moments: List[Moments] = field(default_factory=list)
    norms: List[float] = field(default_factory=list)        # sum |psi|^2 dx before renormalizing
    likelihoods: List[float] = field(default_factory=list)
    snapshots: List[Tuple[int, GridState]] = field(default_factory=list)
    final_state: Optional[GridState] = None
    final_linear: Optional[GridState] = None
    max_norm_drift: float = 0.0
    max_linear_deviation: float = 0.0

    def to_table(self) -> Tuple[List[str], np.ndarray]:
        """t, qhat_1, phat_1, re_omega, im_omega, tau_q2, tau_p2, norm, likelihood."""
        header = ["t", "qhat_1", "phat_1", "re_omega", "im_omega", "tau_q2", "tau_p2", "norm", "likelihood"]
        rows = []
        for mom, norm, lik in zip(self.moments, self.norms, self.likelihoods):
            omega = effective_omega(mom, self.params)
            rows.append([mom.t, mom.qhat, mom.phat, omega.real, omega.imag, mom.tau_q2, mom.tau_p2, norm, lik])
        return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def run_grid_trajectory(
    init: GridState,
    path: NoisePath,
    params: PhysParams,
    record_every: int = 1,
    snapshot_every: int = 0,
    track_linear: bool = True,
) -> GridRecord:
    """
    Evolve the nonlinear equation over an innovation path.

    With track_linear, the linear equation is co-evolved from the same
    initial state, driven by dQ = dQ~ + (2 lambda)^(1/2) qhat dt with qhat
    the pre-step nonlinear mean; its normalized amplitudes should coincide
    with the nonlinear ones and its likelihood is the density of the
    observed record.
    """
    if path.kind is not NoiseKind.INNOVATION:
        raise InvalidParameter("kind", f"expected innovation path, got {path.kind.value}")
    if path.dim != 1:
        raise ShapeMismatch("the grid solver takes a 1-D path")
    if record_every < 1:
        raise InvalidParameter("record_every", f"must be >= 1, got {record_every}")

    record = GridRecord(params=params, seed=path.seed)
    state = init
    linear = init if track_linear else None
    signal = np.sqrt(2.0 * params.lam) * path.dt

    def _record(k: int) -> None:
        record.moments.append(grid_moments(state, params))
        # squared lattice norm before the last renormalization
        record.norms.append(state.raw_norm ** 2)
        record.likelihoods.append(linear.likelihood if linear is not None else 1.0)

    _record(0)
    if snapshot_every:
        record.snapshots.append((0, state))
    for k in range(path.n_steps):
        dQt = float(path.increments[k, 0])
        if linear is not None:
            qhat = position_mean(state)
            linear = step_linear(linear, dQt + signal * qhat, path.dt, params)
        state = step_nonlinear(state, dQt, path.dt, params)
        record.max_norm_drift = max(record.max_norm_drift, abs(state.raw_norm - 1.0))
        if linear is not None:
            record.max_linear_deviation = max(record.max_linear_deviation, l2_distance(state, linear))
        step = k + 1
        if step % record_every == 0 or step == path.n_steps:
            _record(step)
        if snapshot_every and (step % snapshot_every == 0 or step == path.n_steps):
            record.snapshots.append((step, state))

    record.final_state = state
    record.final_linear = linear
    logger.info(
        f"Grid trajectory seed={path.seed}: {path.n_steps} steps, "
        f"max pre-renormalization norm drift {record.max_norm_drift:.3e}"
    )
    return record
