import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plantedfg import kernels
from plantedfg import _kernels_py as py

cy = kernels.compiled_backend
needs_cy = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _inputs(seed, q, k, F):
    g = np.random.default_rng(seed)
    tables = g.uniform(0.1, 2.0, size=(F, q ** k))
    gammas = g.dirichlet(np.ones(q), size=(F, k))
    hs = g.integers(0, k, size=F)
    return tables, gammas, hs


@needs_cy
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(0, 30))
def test_zf_and_messages_parity(seed, q, k, F):
    tables, gammas, hs = _inputs(seed, q, k, F)
    assert np.allclose(cy.zf_batch(tables, gammas), py.zf_batch(tables, gammas), rtol=1e-13, atol=0)
    assert np.allclose(cy.messages_batch(tables, hs, gammas), py.messages_batch(tables, hs, gammas),
                       rtol=1e-13, atol=0)


@needs_cy
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 6), st.integers(0, 5))
def test_assignment_weights_parity(seed, q, k, n, m):
    g = np.random.default_rng(seed)
    wires = g.integers(0, n, size=(m, k))
    logt = g.normal(size=(m, q ** k))
    prior = np.log(g.dirichlet(np.ones(q)))
    a = cy.assignment_log_weights(n, q, wires, logt, prior)
    b = py.assignment_log_weights(n, q, wires, logt, prior)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_python_kernels_against_loops():
    tables, gammas, hs = _inputs(1, 3, 2, 5)
    for f in range(5):
        zf = sum(tables[f][a * 3 + b] * gammas[f, 0, a] * gammas[f, 1, b] for a in range(3) for b in range(3))
        assert abs(py.zf_batch(tables, gammas)[f] - zf) < 1e-14
        msg = np.zeros(3)
        for a in range(3):
            for b in range(3):
                msg[(a, b)[hs[f]]] += tables[f][a * 3 + b] * (gammas[f, 1, b] if hs[f] == 0 else gammas[f, 0, a])
        assert np.allclose(py.messages_batch(tables, hs, gammas)[f], msg, rtol=1e-14)


def test_read_only_inputs():
    tables, gammas, hs = _inputs(2, 2, 3, 4)
    for arr in (tables, gammas, hs):
        arr.setflags(write=False)
    kernels.zf_batch(tables, gammas)
    kernels.messages_batch(tables, hs, gammas)


def test_fallback_selected_by_environment():
    env = dict(os.environ, PLANTEDFG_BACKEND="python")
    code = ("import plantedfg, numpy as np; from plantedfg.zoo import make_nae_sat; "
            "from plantedfg.model import xi_sup; print(plantedfg.BACKEND, xi_sup(make_nae_sat(3, 0.5)).value)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, value = out.stdout.split()
    assert backend == "python" and abs(float(value) - 0.875) < 1e-12
