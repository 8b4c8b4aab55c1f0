import numpy as np
import pytest

import h2mor


@pytest.fixture
def scalar_lag():
    """E=1, A=-1, B=C=1: G(s) = 1/(s+1)."""
    return h2mor.make_model([[1.0]], [[-1.0]], [[1.0]], [[1.0]])


@pytest.fixture
def diag_two_mode():
    """A = diag(-1, -2), E = I, B = [1;1], C = [1 1]."""
    return h2mor.make_model(None, np.diag([-1.0, -2.0]), [[1.0], [1.0]], [[1.0, 1.0]])
