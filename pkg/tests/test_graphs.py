import numpy as np
import pytest
from math import comb

from plantedfg.errors import InvalidArgument, ResourceLimitError
from plantedfg.graphs import (FactorGraph, color_frequencies, compositions, empty_graph,
                              factor_assignment_law, nishimori_weights, sample_iid, sample_m,
                              sample_nishimori, sample_null, sample_teacher_student)
from plantedfg.model import xi
from plantedfg.zoo import make_composed_sbm, make_kspin, make_nae_sat


def test_graph_json_round_trip(rng):
    m = make_nae_sat(3, 0.5)
    g = sample_null(m, 7, 5, rng)
    back = FactorGraph.from_dict(g.to_dict())
    assert np.array_equal(back.wires, g.wires) and np.array_equal(back.atoms, g.atoms)
    e = empty_graph(4, 3)
    assert FactorGraph.from_dict(e.to_dict(), k=3).m == 0


def test_graph_validation():
    with pytest.raises(InvalidArgument):
        FactorGraph(3, [[0, 3]], [0])
    with pytest.raises(InvalidArgument):
        FactorGraph(3, [[0, 1]], [0, 1])
    m = make_nae_sat(3, 0.5)
    with pytest.raises(InvalidArgument):
        FactorGraph(3, [[0, 1]], [0]).log_tables(m)


def test_sample_m_is_poisson(rng):
    m = make_nae_sat(3, 0.5)
    draws = [sample_m(m, 1.5, 30, rng) for _ in range(20000)]
    assert abs(np.mean(draws) - 15.0) < 0.15
    assert abs(np.var(draws) - 15.0) < 0.8
    with pytest.raises(InvalidArgument):
        sample_m(m, -1.0, 10, rng)


def test_color_frequencies():
    assert np.allclose(color_frequencies([0, 2, 2, 1], 3).probs, [0.25, 0.25, 0.5])
    with pytest.raises(InvalidArgument):
        color_frequencies([0, 3], 3)


def test_null_sampler_marginals(rng):
    m = make_nae_sat(3, 0.5)
    g = sample_null(m, 5, 40000, rng)
    assert abs(np.bincount(g.wires.reshape(-1), minlength=5) / g.wires.size - 0.2).max() < 5e-3
    assert abs(np.bincount(g.atoms, minlength=4) / g.m - 0.25).max() < 8e-3


def test_teacher_student_factor_law(rng):
    model = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    sigma = np.array([0, 0, 1, 2, 2, 1, 0, 2])
    m = 60000
    g = sample_teacher_student(model, sigma, m, rng)
    taus = sigma[g.wires]
    idx = taus[:, 0] * 3 + taus[:, 1]
    emp = np.bincount(idx, minlength=9) / m
    lam = factor_assignment_law(model, np.bincount(sigma, minlength=3) / 8)
    assert np.abs(emp - lam).max() < 6e-3
    # wires uniform within a color class
    first = g.wires[taus[:, 0] == 0, 0]
    assert abs(np.bincount(first, minlength=8)[[0, 1, 6]] / first.size - 1 / 3).max() < 1e-2


def test_teacher_student_atom_posterior(rng):
    model = make_kspin(2, 0.8)
    sigma = np.array([0, 1, 0, 1])
    g = sample_teacher_student(model, sigma, 40000, rng)
    agree = sigma[g.wires[:, 0]] == sigma[g.wires[:, 1]]
    # J=+1 (atom 1) favors agreement: psi = exp(-beta J s t) / cosh(beta)
    p_agree_atom1 = model.tables[1][0] * 0.5 / model.psi_bar[0]
    assert abs(np.mean(g.atoms[agree] == 1) - p_agree_atom1) < 1e-2


def test_compositions_count():
    for n, q in ((4, 2), (5, 3), (3, 4)):
        c = compositions(n, q)
        assert c.shape == (comb(n + q - 1, q - 1), q)
        assert np.all(c.sum(axis=1) == n)
        assert len({tuple(r) for r in c}) == c.shape[0]


def test_nishimori_weights_against_brute_force():
    import itertools
    model = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    n, m = 4, 3
    gs = model.gamma_star.probs
    total = 0.0
    for s in itertools.product(range(3), repeat=n):
        freq = np.bincount(s, minlength=3) / n
        total += np.prod(gs[list(s)]) * xi(model, freq) ** m
    w = nishimori_weights(model, n, m)
    assert abs(np.exp(w.log_norm) - total) < 1e-13
    assert abs(w.probabilities().sum() - 1) < 1e-13


def test_nishimori_sampler_class_law(rng):
    model = make_nae_sat(3, 0.2)
    n, m = 5, 6
    w = nishimori_weights(model, n, m)
    counts = {}
    for _ in range(20000):
        s = sample_nishimori(model, n, m, rng, w)
        key = int(np.sum(s))
        counts[key] = counts.get(key, 0) + 1
    for comp, p in zip(w.compositions, w.probabilities()):
        assert abs(counts.get(int(comp[1]), 0) / 20000 - p) < 1.5e-2


def test_nishimori_guard():
    model = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    with pytest.raises(ResourceLimitError):
        nishimori_weights(model, 10 ** 4, 1)


def test_sample_iid(rng):
    model = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    s = sample_iid(model, 50000, rng)
    assert np.abs(np.bincount(s, minlength=3) / s.size - model.gamma_star.probs).max() < 1e-2
