import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from geometry import reference_stencil  # noqa: E402
from kernels import KernelSpec  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def mq():
    """MQ with eps_s = 0.5 at unit spacing."""
    return KernelSpec.from_name('mq', 0.5, 1.0)


@pytest.fixture
def reference():
    return reference_stencil(0.0, 1.0)


@pytest.fixture
def tilted_reference():
    return reference_stencil(0.3, 1.0)
