"""
Complex Riccati flow of the posterior width.

    d omega / dt + (i hbar / m) omega^2 = lambda,   omega(0) = 1 / (2 sigma_q^2)

The flow carries no noise: every trajectory of the filter shares the same
omega(t). This module provides:
1. The closed-form solution (tanh form, with an explicit lambda = 0 branch)
2. A fixed-step RK4 integrator used as an independent check
3. The stationary width alpha and the asymptotic (watchdog) dispersions
"""

import cmath
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from qfilter.errors import BlowUp, DegenerateCase, InvalidParameter, NonNormalizable
from qfilter.posterior import ComplexWidth, PhysParams, as_omega, dispersions

logger = logging.getLogger(__name__)

# |Re z| beyond which tanh(z) equals +-1 to double precision
TANH_SATURATION = 20.0


class RiccatiMethod(Enum):
    ANALYTIC = "analytic"
    RK4 = "rk4"


@dataclass(frozen=True)
class RiccatiSolution:
    """omega(t) sampled on a strictly increasing time grid."""
    t_grid: np.ndarray
    omega_series: np.ndarray       # complex, same length as t_grid
    method: RiccatiMethod

    def __len__(self) -> int:
        return len(self.t_grid)

    @property
    def tau_q2(self) -> np.ndarray:
        return 1.0 / (2.0 * self.omega_series.real)

    def tau_p2(self, params: PhysParams) -> np.ndarray:
        return params.hbar ** 2 * np.abs(self.omega_series) ** 2 / (2.0 * self.omega_series.real)

    def widths(self) -> List[ComplexWidth]:
        return [ComplexWidth(complex(w)) for w in self.omega_series]


# =============================================================================
# Stationary solution and rates
# =============================================================================

def omega_stationary(params: PhysParams) -> ComplexWidth:
    """alpha = (lambda m / 2 hbar)^(1/2) (1 - i), the fixed point of the flow."""
    if params.lam == 0:
        raise DegenerateCase("no stationary width for lambda = 0 (free spreading)")
    a = np.sqrt(params.lam * params.m / (2.0 * params.hbar))
    return ComplexWidth(complex(a, -a))


def relaxation_rate(params: PhysParams) -> float:
    """|lambda / alpha| = (lambda hbar / m)^(1/2), the e-folding rate of omega -> alpha."""
    return float(np.sqrt(params.lam * params.hbar / params.m))


def asymptotic_dispersions(params: PhysParams) -> Tuple[float, float]:
    """
    Limits of the posterior dispersions, independent of the initial packet.

    tau_q2(inf) = (hbar / 2 lambda m)^(1/2), tau_p2(inf) = hbar (lambda m hbar / 2)^(1/2).
    Evaluated through the stationary width so it equals dispersions(alpha) exactly.
    """
    return dispersions(omega_stationary(params), params)


def free_spreading_width(t, sigma_q2: float, params: PhysParams):
    """Unobserved packet: sigma^2 (1 + (hbar t / 2 m sigma^2)^2)."""
    t = np.asarray(t, dtype=float)
    return sigma_q2 * (1.0 + (params.hbar * t / (2.0 * params.m * sigma_q2)) ** 2)


# =============================================================================
# Closed form
# =============================================================================

def _tanh_saturated(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    saturated = np.abs(z.real) > TANH_SATURATION
    safe = np.where(saturated, 0.0, z)
    return np.where(saturated, np.sign(z.real) + 0j, np.tanh(safe))


def omega_analytic_series(t, omega0, params: PhysParams) -> np.ndarray:
    """Closed-form omega(t) evaluated on an array of times."""
    w0 = as_omega(omega0)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParameter("t", "must be >= 0")

    if params.lam == 0:
        values = w0 / (1.0 + 1j * params.hbar * w0 * t / params.m)
    else:
        alpha = omega_stationary(params).omega
        th = _tanh_saturated((params.lam / alpha) * t)
        values = alpha * (w0 + alpha * th) / (w0 * th + alpha)

    values = np.asarray(values, dtype=complex)
    bad = ~(values.real > 0)
    if np.any(bad):
        first = float(np.broadcast_to(t, values.shape)[bad].flat[0])
        raise NonNormalizable(f"closed form lost normalizability at t={first:.6g}")
    return values


def omega_analytic(t: float, omega0, params: PhysParams) -> ComplexWidth:
    """
    Closed-form solution of the width flow.

    For lambda > 0:
        omega(t) = alpha (omega0 + alpha tanh(lambda t / alpha)) / (omega0 tanh(lambda t / alpha) + alpha)
    For lambda = 0 the limit omega0 / (1 + i hbar omega0 t / m) is used.
    """
    return ComplexWidth(complex(omega_analytic_series(float(t), omega0, params)))


def analytic_solution(omega0, params: PhysParams, t_end: float, dt: float) -> RiccatiSolution:
    t_grid = _time_grid(t_end, dt)
    return RiccatiSolution(t_grid, omega_analytic_series(t_grid, omega0, params), RiccatiMethod.ANALYTIC)


# =============================================================================
# RK4
# =============================================================================

def rk4_step(omega: complex, params: PhysParams, dt: float) -> complex:
    """One classical RK4 step of omega' = lambda - (i hbar / m) omega^2."""
    lam = params.lam
    ic = 1j * (params.hbar / params.m)

    def rhs(w: complex) -> complex:
        return lam - ic * (w * w)

    k1 = rhs(omega)
    k2 = rhs(omega + 0.5 * dt * k1)
    k3 = rhs(omega + 0.5 * dt * k2)
    k4 = rhs(omega + dt * k3)
    return omega + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _time_grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    if not t_end >= dt:
        raise InvalidParameter("t_end", f"must be >= dt, got t_end={t_end}, dt={dt}")
    n_steps = int(round(t_end / dt))
    return dt * np.arange(n_steps + 1, dtype=float)


def integrate_riccati(omega0, params: PhysParams, t_end: float, dt: float) -> RiccatiSolution:
    """
    Fixed-step RK4 integration of the width flow.

    The number of steps is round(t_end / dt); the grid is k * dt.

    Raises:
        BlowUp: if Re(omega) <= 0 at some step
    """
    w = as_omega(omega0)
    t_grid = _time_grid(t_end, dt)
    series = np.empty(t_grid.size, dtype=complex)
    series[0] = w
    for k in range(1, t_grid.size):
        w = rk4_step(w, params, dt)
        if not w.real > 0 or not cmath.isfinite(w):
            logger.error(f"Riccati flow lost positivity at step {k} (t={t_grid[k]:.6g})")
            raise BlowUp(float(t_grid[k]), step=k)
        series[k] = w
    logger.debug(f"Integrated Riccati flow: {t_grid.size - 1} steps, omega(T)={w:.12g}")
    return RiccatiSolution(t_grid, series, RiccatiMethod.RK4)
