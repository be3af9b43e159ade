import itertools

import numpy as np
import pytest

from conftest import zoo_models
from plantedfg.errors import ResourceLimitError
from plantedfg.exact import (GraphSpace, audit, exact_joint_law, exact_mutual_information,
                             exact_relative_entropy, first_moment_residual, free_entropy,
                             gibbs_bounds_violation, gibbs_measure, jensen_identities,
                             mi_decomposition, partition_function, product_law_tv,
                             verify_nishimori)
from plantedfg.graphs import FactorGraph, empty_graph, nishimori_weights, sample_null
from plantedfg.zoo import make_bsc_channel, make_nae_sat

MODELS = zoo_models()
SMALL = [(n, m) for n in (1, 2, 3) for m in (0, 1, 2)]


def brute_z(model, g):
    tot = 0.0
    gs = model.gamma_star.probs
    for s in itertools.product(range(model.q), repeat=g.n):
        w = np.prod(gs[list(s)])
        for wires, a in zip(g.wires, g.atoms):
            idx = 0
            for v in wires:
                idx = idx * model.q + s[v]
            w *= model.tables[a][idx]
        tot += w
    return tot


@pytest.mark.parametrize("name", sorted(MODELS))
def test_partition_function_brute_force(name, rng):
    model = MODELS[name]
    for _ in range(3):
        g = sample_null(model, 5, 4, rng)
        assert abs(partition_function(model, g) - brute_z(model, g)) < 1e-12 * brute_z(model, g)


def test_empty_graph_free_entropy():
    model = make_nae_sat(3, 0.5)
    assert free_entropy(model, empty_graph(6, 3)) == 0.0


def test_gibbs_measure_normalized(rng):
    model = make_bsc_channel(3, 0.1)
    g = sample_null(model, 6, 5, rng)
    mu = gibbs_measure(model, g)
    assert abs(mu.probs.sum() - 1) < 1e-12
    assert mu.marginal([2, 0]).shape == (2, 2)


@pytest.mark.parametrize("name", sorted(MODELS))
@pytest.mark.parametrize("n,m", SMALL)
def test_exact_identities(name, n, m):
    model = MODELS[name]
    if model.q ** n * (n ** model.k * model.n_atoms) ** m > 10 ** 7:
        pytest.skip("enumeration too large")
    assert verify_nishimori(model, n, m) < 1e-9
    assert abs(exact_mutual_information(model, n, m) - mi_decomposition(model, n, m).combined) < 1e-9
    assert exact_relative_entropy(model, n, m).residual < 1e-9
    assert product_law_tv(model, n, m) < 1e-10
    assert first_moment_residual(model, n, m) < 1e-12
    jr = jensen_identities(model, n, m)
    assert jr.residual_planted < 1e-9 and jr.residual_null < 1e-9
    assert jr.phi_null <= jr.phi_annealed + 1e-12 <= jr.phi_planted + 2e-12
    assert gibbs_bounds_violation(model, n, m) < 1e-12


def test_joint_law_against_loop_oracle():
    """Independent construction by looping over graphs."""
    model = make_nae_sat(2, 0.4)
    n, m = 2, 2
    law = exact_joint_law(model, n, m)
    sp = law.space
    gs = model.gamma_star.probs
    for gi in range(sp.size):
        g = sp.graph(gi)
        p_null = np.prod(model.atom_probs[g.atoms]) / n ** (model.k * m)
        for si, s in enumerate(itertools.product(range(2), repeat=n)):
            psi = np.prod([model.tables[a][s[w[0]] * 2 + s[w[1]]] for w, a in zip(g.wires, g.atoms)])
            freq = np.bincount(s, minlength=2) / n
            first = sum(model.atom_probs[a] * model.tables[a][s[i] * 2 + s[j]]
                        for a in range(model.n_atoms) for i in range(n) for j in range(n)) / n ** 2
            want = np.prod(gs[list(s)]) * p_null * psi / first ** m
            assert abs(law.probs[si, gi] - want) < 1e-14


def test_mutual_information_nonnegative_and_zero_without_factors():
    model = make_bsc_channel(2, 0.2)
    assert abs(exact_mutual_information(model, 3, 0)) < 1e-15
    assert exact_mutual_information(model, 3, 2) > 0


def test_nishimori_normalizer_matches_mean_partition_function():
    model = make_nae_sat(3, 0.5)
    n, m = 3, 2
    sp = GraphSpace(model, n, m)
    ez = float(np.exp(sp.log_null) @ np.exp(sp.log_z))
    assert abs(np.log(ez) - nishimori_weights(model, n, m).log_norm) < 1e-12


def test_audit_rows_small():
    model = make_nae_sat(3, 0.5)
    rows = audit(model, 2, 1)
    assert all(r < 1e-9 for _, r in rows)


def test_guards():
    model = make_nae_sat(3, 0.5)
    with pytest.raises(ResourceLimitError):
        GraphSpace(model, 8, 4)
    with pytest.raises(ResourceLimitError):
        partition_function(model, FactorGraph(30, [[0, 1, 2]], [0]))
