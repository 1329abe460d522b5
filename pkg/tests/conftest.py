import numpy as np
import pytest

from dyadic_bump.mesh import DyadicMesh, GridFunction
from dyadic_bump.weights import cascade


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=[1, 2], ids=["d1", "d2"])
def mesh(request):
    return DyadicMesh(request.param, 6 if request.param == 1 else 4)


@pytest.fixture
def pair():
    m = DyadicMesh(1, 8)
    return cascade(m, 0.5, 1), cascade(m, 0.5, 2)


def random_positive(mesh, rng, spread=2.0):
    return GridFunction(mesh, np.exp(rng.uniform(-spread, spread, mesh.n_cells)))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in list(sys.modules.items())
                if name.rsplit(".", 1)[-1] == "test_acceptance"), None)
    RESULTS = getattr(mod, "RESULTS", None)
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
