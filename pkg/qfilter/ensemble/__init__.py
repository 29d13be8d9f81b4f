# Monte Carlo ensembles and the likelihood martingale check
from .ensemble import EnsembleStats, martingale_check, run_ensemble
