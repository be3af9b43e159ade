import itertools
from math import comb, log

import numpy as np
import pytest
from scipy.integrate import quad

from plantedfg.errors import InvalidArgument
from plantedfg.exact import DenseMeasure, gibbs_measure
from plantedfg.graphs import sample_null
from plantedfg.pinning import (PinSpec, iota_ell, nu_ell, pin_measure, pin_set_probabilities,
                               pinning_bound, pinning_lemma_table, sample_pins, surjections,
                               tuple_divergences, verify_pinned_nishimori, verify_pinning_lemma)
from plantedfg.zoo import make_bsc_channel, make_nae_sat
from conftest import two_atom_model


def random_measure(rng, n, q, conc=0.3):
    return DenseMeasure(n, q, rng.dirichlet(np.full(q ** n, conc)))


def correlated_pair(q):
    p = np.zeros(q * q)
    p[[c * q + c for c in range(q)]] = 1.0 / q
    return DenseMeasure(2, q, p)


def brute_iota(mu, ell, convention):
    vals = [tuple_divergences(mu, v, convention)[0] for v in itertools.product(range(mu.n), repeat=ell)]
    return float(np.mean(vals))


def test_surjections():
    assert [surjections(4, s) for s in range(6)] == [0, 1, 14, 36, 24, 0]
    assert surjections(0, 0) == 1


def test_pin_measure_basic():
    mu = correlated_pair(3)
    assert pin_measure(mu, (), (0, 0)) is mu
    pinned = pin_measure(mu, [0], (2, 0))
    assert np.allclose(pinned.marginal([1]), [0, 0, 1])
    with pytest.raises(InvalidArgument):
        pin_measure(mu, [0, 1], (0, 1))


def test_pin_measure_idempotent_and_product(rng):
    mu = random_measure(rng, 4, 2)
    once = pin_measure(mu, [1, 3], (0, 1, 0, 1))
    twice = pin_measure(once, [1, 3], (0, 1, 0, 1))
    assert np.allclose(once.probs, twice.probs, atol=1e-15)
    prod = DenseMeasure.product([[0.3, 0.7], [0.6, 0.4], [0.5, 0.5]])
    p = pin_measure(prod, [1], (0, 1, 0))
    assert np.allclose(p.probs, DenseMeasure.product([[0.3, 0.7], [0, 1], [0.5, 0.5]]).probs)


def test_pin_measure_gibbs_row(rng):
    model = make_nae_sat(2, 0.3)
    g = sample_null(model, 2, 3, rng)
    mu = gibbs_measure(model, g)
    row = mu.tensor()[1, :]
    assert np.allclose(pin_measure(mu, [0], (1, 0)).tensor()[1, :], row / row.sum())


def test_iota_examples():
    assert abs(iota_ell(correlated_pair(3), 2) - log(3) / 2) < 1e-14
    assert abs(iota_ell(correlated_pair(3), 2, "literal") - log(3)) < 1e-14
    prod = DenseMeasure.product([[0.2, 0.8]] * 3)
    assert all(abs(iota_ell(prod, e)) < 1e-14 for e in (0, 1, 2, 3))
    assert iota_ell(correlated_pair(2), 1) == 0.0


@pytest.mark.parametrize("convention", ["collapse", "literal"])
def test_iota_against_tuple_enumeration(rng, convention):
    for n, q, ell in ((3, 2, 2), (3, 3, 3), (4, 2, 3)):
        mu = random_measure(rng, n, q)
        want = brute_iota(mu, ell, convention)
        assert abs(iota_ell(mu, ell, convention) - want) < 1e-12
        assert iota_ell(mu, ell, convention) <= (ell - 1) * log(q) + 1e-12


def test_pinsker_and_nu(rng):
    for _ in range(100):
        mu = random_measure(rng, 3, 2)
        for v in itertools.product(range(3), repeat=2):
            kl, tv = tuple_divergences(mu, v)
            assert tv <= np.sqrt(kl / 2) + 1e-12
    mu = correlated_pair(2)
    tvs = [tuple_divergences(mu, v)[1] for v in itertools.product(range(2), repeat=2)]
    assert abs(nu_ell(mu, 2) - np.mean(tvs)) < 1e-15
    assert nu_ell(DenseMeasure.product([[0.5, 0.5]] * 2), 2) == 0.0


def test_pin_set_probabilities_against_integral():
    n, theta = 6, 2.5
    p = pin_set_probabilities(n, theta)
    for j in range(n + 1):
        want = quad(lambda t: (t / n) ** j * (1 - t / n) ** (n - j), 0, theta)[0] / theta
        assert abs(p[j] - want) < 1e-13
    assert abs(sum(comb(n, j) * p[j] for j in range(n + 1)) - 1) < 1e-12


def test_sample_pins_distribution(rng):
    mu = random_measure(rng, 5, 2)
    sizes = [len(sample_pins(mu, 3.0, rng).pinned) for _ in range(20000)]
    assert abs(np.mean(sizes) - 1.5) < 0.03
    with pytest.raises(InvalidArgument):
        sample_pins(mu, 6.0, rng)
    with pytest.raises(InvalidArgument):
        PinSpec(0.0, (), (0, 0))


def brute_pinned_iota(mu, ell, theta):
    """E over theta, U, sigma of iota of the pinned measure by full enumeration."""
    n = mu.n
    probs = pin_set_probabilities(n, theta)
    tot = 0.0
    for r in range(n + 1):
        for U in itertools.combinations(range(n), r):
            marg = mu.marginal(list(U)).reshape(-1) if U else np.ones(1)
            for flat, pu in enumerate(marg):
                if pu == 0:
                    continue
                sc = [0] * n
                for i, c in zip(U, np.unravel_index(flat, (mu.q,) * r) if U else ()):
                    sc[i] = int(c)
                tot += probs[r] * pu * iota_ell(pin_measure(mu, U, tuple(sc)), ell)
    return tot


def test_exact_pinning_table_against_enumeration(rng):
    mu = random_measure(rng, 4, 2)
    checks = pinning_lemma_table(mu, [2, 3], [1.0, 4.0])
    for c in checks:
        assert abs(c.lhs - brute_pinned_iota(mu, c.ell, c.theta_cap)) < 1e-12
        assert c.exact and c.std_error == 0.0 and c.passed


def test_monte_carlo_pinning_agrees_with_exact(rng):
    mu = random_measure(rng, 5, 2, conc=0.1)
    ex = verify_pinning_lemma(mu, 2, 2.0)
    mc = verify_pinning_lemma(mu, 2, 2.0, samples=4000, rng=3, exact=False)
    assert abs(ex.lhs - mc.lhs) < 4 * mc.std_error
    assert ex.rhs == pinning_bound(2, 2, 2.0)


def test_pinning_lemma_nae_example(rng):
    model = make_nae_sat(3, 0.5)
    mu = gibbs_measure(model, sample_null(model, 8, 6, rng))
    for theta in (4.0, 8.0):
        c = verify_pinning_lemma(mu, 2, theta)
        assert c.passed and c.lhs <= log(2) / theta


def test_pinned_nishimori_exact():
    assert verify_pinned_nishimori(two_atom_model(2), 2, 1, 2.0) < 1e-9
    assert verify_pinned_nishimori(make_bsc_channel(2, 0.2), 2, 1, 1.0) < 1e-9
    assert verify_pinned_nishimori(make_bsc_channel(2, 0.2), 2, 1, 1e-9) < 1e-9
