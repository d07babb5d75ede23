import math

import pytest

from vanishdist.norms import SobolevParams


@pytest.fixture
def sp23():
    """Default critical pair n=2, p=3 (s=2/3)."""
    return SobolevParams(2, 3.0)


@pytest.fixture
def log1e3():
    return math.log(1e-3)
