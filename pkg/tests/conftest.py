import numpy as np
import pytest

from sme_entropy import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param
