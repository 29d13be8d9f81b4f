# Physical parameters and Gaussian posterior state
from .posterior import (
    ComplexWidth,
    GaussianPosterior,
    PhysParams,
    WaveCoefficient,
    as_omega,
    dispersions,
    forward_w,
    heisenberg_product,
    make_params,
    osmotic_velocity,
    posterior_density,
    reconstruct_qp,
)
