# Posterior dynamics of a continuously observed free quantum particle
__version__ = "0.1.0"
