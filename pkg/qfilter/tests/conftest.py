import os
import sys

import pytest

# Add paths for imports: the domain package and the CLI tree
ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, ROOT)
sys.path.insert(0, os.path.join(ROOT, "runner"))

from qfilter.posterior import make_params


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size acceptance runs (minutes)")


@pytest.fixture
def unit_params():
    """hbar = m = lambda = 1, one dimension."""
    return make_params(m=1.0, hbar=1.0, lam=1.0, dim=1)


@pytest.fixture
def free_params():
    """No measurement: lambda = 0."""
    return make_params(m=1.0, hbar=1.0, lam=0.0, dim=1)
