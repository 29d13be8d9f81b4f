# Riccati flow of the posterior width
from .riccati import (
    RiccatiMethod,
    RiccatiSolution,
    analytic_solution,
    asymptotic_dispersions,
    free_spreading_width,
    integrate_riccati,
    omega_analytic,
    omega_analytic_series,
    omega_stationary,
    relaxation_rate,
    rk4_step,
)
