# Gaussian filter (Hamilton-Langevin and osmotic-coefficient routes)
from .gaussian import (
    TrajectoryRecord,
    initial_from_packet,
    noise_gains,
    omega_flow,
    propagate_batch,
    record_indices,
    simulate_trajectory,
    step_qp,
    step_w,
)
