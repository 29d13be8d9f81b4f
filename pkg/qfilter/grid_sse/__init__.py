# Lattice integration of the posterior wave equation
from .grid import (
    GridRecord,
    GridSpec,
    GridState,
    Moments,
    auto_grid,
    effective_omega,
    grid_moments,
    init_grid,
    kinetic_step,
    l2_distance,
    position_mean,
    run_grid_trajectory,
    snapshot_rows,
    step_linear,
    step_nonlinear,
)
