import numpy as np
import pytest

from sinegap import build_p1_table, default_p1_grid, default_p1_horizon
from sinegap.config import DEFAULT_CONFIG


@pytest.fixture(scope="session")
def cfg():
    return DEFAULT_CONFIG


@pytest.fixture(scope="session")
def p1_table_beta2():
    """Moderate-accuracy survival table shared by the estimator tests."""
    return build_p1_table(default_p1_grid(), 2.0, 3000,
                          default_p1_horizon(2.0), seed=424242)


def combined_stderr(*errs):
    return float(np.sqrt(sum(e * e for e in errs)))
