import numpy as np
import pytest

from wavefuse import _pykernels
from wavefuse.data import BlobSpec, Dataset, generate_blobs

try:
    from wavefuse import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def two_blobs():
    spec = BlobSpec([[0.0, 0.0], [10.0, 10.0]], [1.0, 1.0], [30, 30])
    return generate_blobs(spec, seed=1)


@pytest.fixture(scope="session")
def five_class():
    spec = BlobSpec.from_fractions(
        [0.493, 0.101, 0.273, 0.053, 0.081], 400, 4, separation=2.0, std=1.0, seed=3
    )
    return generate_blobs(spec, seed=3)


def make_dataset(labels, d=2, seed=0, n_classes=None):
    labels = np.asarray(labels)
    x = np.random.default_rng(seed).normal(size=(len(labels), d))
    return Dataset(x, labels, n_classes or int(labels.max()) + 1)
