import numpy as np
import pytest

from plantedfg.model import constant_model, make_model
from plantedfg.zoo import make_bsc_channel, make_composed_sbm, make_kspin, make_nae_sat


def two_atom_model(k=2):
    """Small q=2 model with two asymmetric atoms, used by several oracles."""
    if k == 2:
        tables = [[1.4, 0.8, 0.7, 1.2], [0.9, 1.3, 1.1, 0.75]]
    else:
        g = np.random.default_rng(17)
        tables = g.uniform(0.6, 1.5, size=(2, 2 ** k))
    return make_model(2, k, tables, [0.4, 0.6], [0.5, 0.5])


def zoo_models():
    return {
        "nae-sat": make_nae_sat(3, 0.5),
        "kspin": make_kspin(3, 0.5),
        "sbm": make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0),
        "bsc-channel": make_bsc_channel(3, 0.1),
        "constant": constant_model(2, 2, [1.5]),
        "constant-random": constant_model(2, 2, [0.8, 1.6], [0.5, 0.5]),
        "two-atom": two_atom_model(),
    }


@pytest.fixture(params=sorted(zoo_models()))
def any_model(request):
    return zoo_models()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
