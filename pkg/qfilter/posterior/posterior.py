"""
Physical parameters and the Gaussian posterior state.

The posterior wave function of the observed free particle stays a Gaussian
packet

    psi(t, x) = c(t) exp{-omega(t) (x - qhat)^2 / 2 + (i/hbar) phat . x}

so the filtered state is fully described by (qhat, phat, omega). The same
state can be written through the coefficient w of the linear osmotic
velocity W(t, x) = w - (hbar/m) omega x; this module holds the maps between
the two coordinate systems and the derived dispersions.

All types are frozen values; all functions are pure.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from qfilter.errors import InvalidParameter, NonNormalizable

logger = logging.getLogger(__name__)

ALLOWED_DIMS = (1, 3)

OmegaLike = Union["ComplexWidth", complex, float]


@dataclass(frozen=True)
class PhysParams:
    """Mass, action quantum, measurement accuracy coefficient and dimension."""
    m: float
    hbar: float = 1.0
    lam: float = 1.0               # measurement accuracy, length^-2 time^-1
    dim: int = 1

    def __post_init__(self):
        if not np.isfinite(self.m) or self.m <= 0:
            raise InvalidParameter("m", f"must be > 0, got {self.m}")
        if not np.isfinite(self.hbar) or self.hbar <= 0:
            raise InvalidParameter("hbar", f"must be > 0, got {self.hbar}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidParameter("lambda", f"must be >= 0, got {self.lam}")
        if self.dim not in ALLOWED_DIMS:
            raise InvalidParameter("dim", f"must be 1 or 3, got {self.dim}")

    def to_dict(self) -> dict:
        return {"m": self.m, "hbar": self.hbar, "lambda": self.lam, "dim": self.dim}


def make_params(m: float, hbar: float = 1.0, lam: float = 1.0, dim: int = 1) -> PhysParams:
    """Validated constructor; raises InvalidParameter naming the bad field."""
    try:
        dim_value = int(dim)
    except (TypeError, ValueError):
        raise InvalidParameter("dim", f"must be 1 or 3, got {dim!r}")
    if dim_value != dim:
        raise InvalidParameter("dim", f"must be 1 or 3, got {dim!r}")
    return PhysParams(m=float(m), hbar=float(hbar), lam=float(lam), dim=dim_value)


@dataclass(frozen=True)
class ComplexWidth:
    """Complex inverse width omega of the posterior Gaussian, Re(omega) > 0."""
    omega: complex

    def __post_init__(self):
        value = complex(self.omega)
        if not (np.isfinite(value.real) and np.isfinite(value.imag)) or value.real <= 0:
            raise NonNormalizable(f"Re(omega) must be > 0, got omega={value}")
        object.__setattr__(self, "omega", value)

    @property
    def real(self) -> float:
        return self.omega.real

    @property
    def imag(self) -> float:
        return self.omega.imag


def as_omega(omega: OmegaLike) -> complex:
    """Unwrap a ComplexWidth or raw number, enforcing Re(omega) > 0."""
    if isinstance(omega, ComplexWidth):
        return omega.omega
    value = complex(omega)
    if not (np.isfinite(value.real) and np.isfinite(value.imag)) or value.real <= 0:
        raise NonNormalizable(f"Re(omega) must be > 0, got omega={value}")
    return value


def _frozen_vector(values, dtype, dim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    if arr.size == 1 and dim > 1:
        arr = np.full(dim, arr[0], dtype=dtype)
    if arr.shape != (dim,):
        raise InvalidParameter(name, f"expected {dim} components, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianPosterior:
    """Filtered state at time t: posterior means and the shared complex width."""
    t: float
    qhat: np.ndarray
    phat: np.ndarray
    omega: ComplexWidth

    def __post_init__(self):
        qhat = np.asarray(self.qhat, dtype=float).reshape(-1)
        object.__setattr__(self, "qhat", _frozen_vector(qhat, float, qhat.size, "qhat"))
        object.__setattr__(self, "phat", _frozen_vector(self.phat, float, qhat.size, "phat"))
        if not isinstance(self.omega, ComplexWidth):
            object.__setattr__(self, "omega", ComplexWidth(self.omega))

    @property
    def dim(self) -> int:
        return self.qhat.size


@dataclass(frozen=True)
class WaveCoefficient:
    """Coefficient w of the linear osmotic velocity W(t, x) = w - (hbar/m) omega x."""
    w: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=complex))

    def __post_init__(self):
        arr = np.array(self.w, dtype=complex).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)


# =============================================================================
# Coordinate maps
# =============================================================================

def dispersions(omega: OmegaLike, params: PhysParams) -> Tuple[float, float]:
    """
    Posterior position and momentum dispersions for a given width.

    Returns:
        (tau_q2, tau_p2) with tau_q2 = 1/(2 Re omega) and
        tau_p2 = hbar^2 |omega|^2 / (2 Re omega)
    """
    value = as_omega(omega)
    tau_q2 = 1.0 / (2.0 * value.real)
    tau_p2 = params.hbar ** 2 * abs(value) ** 2 / (2.0 * value.real)
    return tau_q2, tau_p2


def heisenberg_product(omega: OmegaLike, params: PhysParams) -> float:
    """tau_q2 * tau_p2 = hbar^2 |omega|^2 / (4 (Re omega)^2) >= hbar^2 / 4."""
    tau_q2, tau_p2 = dispersions(omega, params)
    return tau_q2 * tau_p2


def forward_w(
    qhat: np.ndarray, phat: np.ndarray, omega: OmegaLike, params: PhysParams
) -> WaveCoefficient:
    """w = (hbar/m) omega qhat + (i/m) phat."""
    value = as_omega(omega)
    qhat = np.asarray(qhat, dtype=float)
    phat = np.asarray(phat, dtype=float)
    w = (params.hbar / params.m) * value * qhat + (1j / params.m) * phat
    return WaveCoefficient(w)


def reconstruct_qp(
    w: WaveCoefficient, omega: OmegaLike, params: PhysParams
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Recover the posterior means from the osmotic-velocity coefficient.

    qhat is where Re W vanishes (the maximum of the posterior density);
    phat = Im(m w - hbar omega qhat).
    """
    value = as_omega(omega)
    w_arr = np.asarray(w.w if isinstance(w, WaveCoefficient) else w, dtype=complex)
    qhat = params.m * w_arr.real / (params.hbar * value.real)
    phat = (params.m * w_arr - params.hbar * value * qhat).imag
    return qhat, phat


def osmotic_velocity(
    w: WaveCoefficient, omega: OmegaLike, params: PhysParams, x: np.ndarray
) -> np.ndarray:
    """Complex osmotic velocity W(t, x) = w - (hbar/m) omega x, componentwise."""
    value = complex(omega.omega if isinstance(omega, ComplexWidth) else omega)
    w_arr = np.asarray(w.w if isinstance(w, WaveCoefficient) else w, dtype=complex)
    return w_arr - (params.hbar / params.m) * value * np.asarray(x, dtype=float)


def posterior_density(state: GaussianPosterior, x: np.ndarray) -> np.ndarray:
    """
    Gaussian posterior density |psi(t, x)|^2 at points x.

    Args:
        state: the filtered state
        x: array of shape (..., dim) (a 1-D array is accepted for dim=1)

    Returns:
        density values of shape (...)
    """
    tau_q2 = 1.0 / (2.0 * state.omega.real)
    x = np.asarray(x, dtype=float)
    if state.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., np.newaxis]
    sq = np.sum((x - state.qhat) ** 2, axis=-1)
    norm = (2.0 * np.pi * tau_q2) ** (-state.dim / 2.0)
    return norm * np.exp(-sq / (2.0 * tau_q2))
