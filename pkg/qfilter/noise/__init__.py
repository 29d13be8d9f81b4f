# Reproducible Wiener records
from .noise import (
    NoiseKind,
    NoisePath,
    coarsen,
    derive_seed,
    innovation_to_output,
    load_path_csv,
    output_to_innovation,
    save_path_csv,
    wiener_path,
)
