"""
Discretized Wiener records driving the filter.

The fundamental noise of a simulated trajectory is the innovation Q~, a
standard Wiener process under the posterior description. The observed
output record Q is derived from it by adding back the position signal:

    dQ = dQ~ + (2 lambda)^(1/2) qhat(t) dt

Generator contract: numpy `Generator(PCG64)` seeded through
`SeedSequence(seed)`, normals drawn with `Generator.standard_normal`
(ziggurat) and scaled by sqrt(dt). Paths are bit-identical for the same
(seed, dt, n_steps, dim) within this implementation.
"""

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from qfilter.errors import InvalidParameter, ShapeMismatch
from qfilter.posterior import PhysParams

logger = logging.getLogger(__name__)

SEED_MASK = (1 << 64) - 1


class NoiseKind(Enum):
    INNOVATION = "innovation"      # dQ~, Wiener under the posterior measure
    OUTPUT = "output"              # dQ, the observed record
    PRIOR = "prior"                # raw Wiener record under the reference measure


@dataclass(frozen=True)
class NoisePath:
    dt: float
    n_steps: int
    dim: int
    increments: np.ndarray         # shape (n_steps, dim)
    kind: NoiseKind
    seed: int

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, np.newaxis]
        if inc.shape != (self.n_steps, self.dim):
            raise ShapeMismatch(f"increments shape {inc.shape} != ({self.n_steps}, {self.dim})")
        if not np.all(np.isfinite(inc)):
            raise InvalidParameter("increments", "must be finite")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    def times(self) -> np.ndarray:
        """Step start times t_k = k dt, k = 0..n_steps-1."""
        return self.dt * np.arange(self.n_steps, dtype=float)


def derive_seed(base_seed: int, index: int) -> int:
    """
    Per-trajectory seed: first 64-bit word of SeedSequence([base_seed, index]).

    Independent of the order in which trajectories are generated.
    """
    if base_seed < 0 or index < 0:
        raise InvalidParameter("seed", "seeds and trajectory indices must be >= 0")
    state = np.random.SeedSequence([int(base_seed) & SEED_MASK, int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def wiener_path(
    dt: float,
    n_steps: int,
    dim: int,
    seed: int,
    kind: NoiseKind = NoiseKind.INNOVATION,
) -> NoisePath:
    """
    Standard Wiener increments: i.i.d. N(0, dt) per component.

    Args:
        dt: step size (> 0)
        n_steps: number of increments (>= 1)
        dim: number of components (1 or 3)
        seed: non-negative 64-bit seed
        kind: innovation by default; PRIOR for reference-measure records

    Returns:
        NoisePath, deterministic in seed
    """
    if not dt > 0:
        raise InvalidParameter("dt", f"must be > 0, got {dt}")
    if n_steps < 1:
        raise InvalidParameter("n_steps", f"must be >= 1, got {n_steps}")
    if dim not in (1, 3):
        raise InvalidParameter("dim", f"must be 1 or 3, got {dim}")
    if seed < 0:
        raise InvalidParameter("seed", f"must be >= 0, got {seed}")
    if kind is NoiseKind.OUTPUT:
        raise InvalidParameter("kind", "output records are derived, not sampled")

    rng = np.random.default_rng(int(seed) & SEED_MASK)
    increments = rng.standard_normal((n_steps, dim)) * np.sqrt(dt)
    return NoisePath(dt=dt, n_steps=n_steps, dim=dim, increments=increments, kind=kind, seed=int(seed))


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    """Sum consecutive groups of `factor` increments: the same Brownian path at step factor*dt."""
    if factor < 1 or path.n_steps % factor:
        raise ShapeMismatch(f"cannot coarsen {path.n_steps} steps by {factor}")
    summed = path.increments.reshape(path.n_steps // factor, factor, path.dim).sum(axis=1)
    return NoisePath(path.dt * factor, path.n_steps // factor, path.dim, summed, path.kind, path.seed)


# =============================================================================
# Innovation <-> output
# =============================================================================

def _signal(path: NoisePath, qhat_series: np.ndarray, params: PhysParams) -> np.ndarray:
    q = np.asarray(qhat_series, dtype=float)
    if q.ndim == 1 and path.dim == 1:
        q = q[:, np.newaxis]
    if q.shape != path.increments.shape:
        raise ShapeMismatch(f"qhat_series shape {q.shape} != increments shape {path.increments.shape}")
    return np.sqrt(2.0 * params.lam) * q * path.dt


def innovation_to_output(path: NoisePath, qhat_series: np.ndarray, params: PhysParams) -> NoisePath:
    """dQ_k = dQ~_k + (2 lambda)^(1/2) qhat(t_k) dt, with qhat at the step start."""
    if path.kind is not NoiseKind.INNOVATION:
        raise InvalidParameter("kind", f"expected innovation path, got {path.kind.value}")
    out = path.increments + _signal(path, qhat_series, params)
    return NoisePath(path.dt, path.n_steps, path.dim, out, NoiseKind.OUTPUT, path.seed)


def output_to_innovation(path: NoisePath, qhat_series: np.ndarray, params: PhysParams) -> NoisePath:
    """Inverse of innovation_to_output."""
    if path.kind is not NoiseKind.OUTPUT:
        raise InvalidParameter("kind", f"expected output path, got {path.kind.value}")
    inn = path.increments - _signal(path, qhat_series, params)
    return NoisePath(path.dt, path.n_steps, path.dim, inn, NoiseKind.INNOVATION, path.seed)


# =============================================================================
# CSV dump / restore
# =============================================================================

def save_path_csv(path: NoisePath, file_path: Union[str, Path]) -> Path:
    """Columns: step, dQ_1..dQ_dim; values at 17 significant digits."""
    file_path = Path(file_path)
    with open(file_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["step"] + [f"dQ_{j + 1}" for j in range(path.dim)])
        for k, row in enumerate(path.increments):
            writer.writerow([k] + [format(float(v), ".17g") for v in row])
    logger.info(f"Wrote {path.kind.value} path ({path.n_steps} steps) to {file_path}")
    return file_path


def load_path_csv(
    file_path: Union[str, Path], dt: float, seed: int, kind: NoiseKind = NoiseKind.INNOVATION
) -> NoisePath:
    with open(file_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        dim = len(header) - 1
        rows = [[float(v) for v in row[1:]] for row in reader if row]
    increments = np.array(rows, dtype=float).reshape(len(rows), dim)
    return NoisePath(dt=dt, n_steps=len(rows), dim=dim, increments=increments, kind=kind, seed=seed)
