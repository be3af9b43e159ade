import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plantedfg.errors import InvalidArgument
from plantedfg.model import (Simplex, WeightFunction, check_bal, constant_model, load_model, make_model,
                             model_from_dict, model_hash, model_to_dict, phi_annealed, save_model, xi,
                             xi_batch, xi_grad, xi_sup, zf, zfm, zv)
from plantedfg.zoo import make_composed_sbm, make_nae_sat

A, B = 1.3, 0.8
SYM = [A, B, B, A]   # [[a, b], [b, a]]


def sym_model(gamma_star=(0.5, 0.5)):
    return make_model(2, 2, [SYM], [1.0], gamma_star)


def random_simplex(g, q):
    return g.dirichlet(np.ones(q))


# ---------------------------------------------------------------- types

def test_simplex_renormalizes_small_error():
    s = Simplex([0.5, 0.5 + 1e-10])
    assert abs(s.probs.sum() - 1) < 1e-15


def test_simplex_rejects_large_error():
    with pytest.raises(InvalidArgument):
        Simplex([0.5, 0.6])


def test_weight_table_bounds_enforced():
    with pytest.raises(InvalidArgument):
        make_model(2, 2, [[1.0, 1.0, 1.0, 5.0]], [1.0], [0.5, 0.5], psi_min=0.4)


def test_gamma_star_below_psi_min_rejected():
    with pytest.raises(InvalidArgument):
        make_model(2, 2, [SYM], [1.0], [0.1, 0.9], psi_min=0.3)


def test_weight_function_call_uses_row_major_order():
    w = WeightFunction(2, 2, np.array([1.0, 2.0, 3.0, 4.0]))
    assert w((0, 1)) == 2.0 and w((1, 0)) == 3.0


# ---------------------------------------------------------------- xi

def test_xi_nae_sat_constant(rng):
    m = make_nae_sat(3, 0.5)
    for _ in range(20):
        assert abs(xi(m, random_simplex(rng, 2)) - 0.875) < 1e-12


def test_xi_constant_weights(rng):
    m = constant_model(3, 2, [1.7])
    assert abs(xi(m, random_simplex(rng, 3)) - 1.7) < 1e-12


def test_xi_symmetric_two_by_two():
    assert abs(xi(sym_model(), [0.5, 0.5]) - (A + B) / 2) < 1e-15


def test_xi_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        xi(sym_model(), [0.2, 0.3, 0.5])


def test_xi_batch_matches_scalar(rng):
    m = make_model(3, 3, [rng.uniform(0.5, 1.5, 27), rng.uniform(0.5, 1.5, 27)], [0.3, 0.7], [1 / 3] * 3)
    gs = rng.dirichlet(np.ones(3), size=50)
    assert np.allclose(xi_batch(m, gs), [xi(m, g) for g in gs], atol=1e-14)


def test_xi_grad_matches_finite_differences(rng):
    m = make_model(3, 3, [rng.uniform(0.5, 1.5, 27)], [1.0], [1 / 3] * 3)
    g = random_simplex(rng, 3)
    grad = xi_grad(m, g)
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1e-6
        fd = (m_xi_raw(m, g + e) - m_xi_raw(m, g - e)) / 2e-6
        assert abs(fd - grad[i]) < 1e-7


def m_xi_raw(m, g):
    # unnormalized polynomial evaluation, the oracle for the gradient
    return float(sum(m.psi_bar[t] * np.prod(g[m.digits[t]]) for t in range(m.digits.shape[0])))


# ---------------------------------------------------------------- xi_sup

def test_xi_sup_nae_sat_reports_gamma_star():
    m = make_nae_sat(3, 0.5, gamma_star=[0.6, 0.4])
    res = xi_sup(m)
    assert abs(res.value - 0.875) < 1e-12
    assert np.allclose(res.maximizer.probs, [0.6, 0.4])


def test_xi_sup_constant():
    assert abs(xi_sup(constant_model(2, 3, [2.5])).value - 2.5) < 1e-12


def test_xi_sup_dominates_vertices_and_gamma_star(rng):
    for _ in range(5):
        m = make_model(3, 2, [rng.uniform(0.5, 1.8, 9)], [1.0], [1 / 3] * 3)
        v = xi_sup(m).value
        for e in np.eye(3):
            assert v >= xi(m, e) - 1e-9
        assert v >= xi(m, m.gamma_star) - 1e-9
        # dense grid oracle
        grid = [(a, b, 1 - a - b) for a in np.linspace(0, 1, 41) for b in np.linspace(0, 1, 41) if a + b <= 1 + 1e-12]
        assert v >= max(xi(m, np.clip(p, 0, 1)) for p in grid) - 1e-9


def test_xi_sup_sbm_closed_form():
    m = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    res = xi_sup(m)
    xs = np.linspace(0, 1, 1_000_001)
    # f(x) restricted to uniform-within-class vectors
    f = 1.0 - 0.5 * xs ** 2 - 0.5 * (1 - xs) ** 2 / 2
    x_grid = xs[np.argmax(f)]
    assert abs(res.maximizer.probs[0] - x_grid) < 1e-6
    assert abs(res.value - f.max()) < 1e-9


def test_check_bal_examples():
    assert check_bal(make_nae_sat(3, 0.5, gamma_star=[0.7, 0.3]))
    assert check_bal(make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0))
    far = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    off = make_model(3, 2, far.tables, [1.0], [0.9, 0.05, 0.05], psi_min=0.04)
    assert not check_bal(off)
    with pytest.raises(InvalidArgument):
        check_bal(off, tol=0)


def test_maximizer_second_order(rng):
    m = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    g = m.gamma_star.probs
    base = xi(m, g)
    for _ in range(50):
        eta = rng.normal(size=3)
        eta -= eta.mean()
        eta /= np.linalg.norm(eta)
        assert xi(m, g + 1e-3 * eta) <= base + 1e-12


# ---------------------------------------------------------------- zf / zfm / zv

def test_zf_examples():
    assert abs(zf([1.1] * 4, [[0.3, 0.7], [0.6, 0.4]]) - 1.1) < 1e-15
    assert abs(zf(SYM, [[0.5, 0.5], [0.5, 0.5]]) - (A + B) / 2) < 1e-15
    assert zf(SYM, [[1, 0], [0, 1]]) == B


def test_zfm_examples():
    assert abs(zfm(SYM, 0, [[[1, 0], [0.2, 0.8]], [[0.9, 0.1], [0.5, 0.5]]]) - (A + B) / 2) < 1e-15
    assert abs(zfm([0.9] * 4, 1, [[[1, 0], [0, 1]], [[0.3, 0.7], [0.5, 0.5]]]) - 0.9) < 1e-15
    with pytest.raises(InvalidArgument):
        zfm(SYM, 2, [[[1, 0], [0, 1]], [[1, 0], [0, 1]]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2), st.lists(st.floats(0.01, 1.0), min_size=9, max_size=9))
def test_zfm_collapses_to_zf(h, raw):
    g = np.array(raw).reshape(3, 3)
    g /= g.sum(axis=1, keepdims=True)
    table = np.linspace(0.5, 1.5, 27)
    assert zfm(table, h, [g, g]) == zf(table, g)


def test_zv_examples():
    m = sym_model()
    assert zv(m, 0, [], [], []) == 1.0
    c = constant_model(2, 2, [1.2])
    v = zv(c, 3, [c.tables[0]] * 3, [0, 1, 0], [[[0.2, 0.8], [0.6, 0.4]]] * 3)
    assert abs(v - 1.2 ** 3) < 1e-12
    assert abs(zv(m, 1, [SYM], [0], [[[0.5, 0.5], [0.5, 0.5]]]) - (A + B) / 2) < 1e-15
    with pytest.raises(InvalidArgument):
        zv(m, 2, [SYM], [0], [[[0.5, 0.5], [0.5, 0.5]]])


def test_bounds_on_random_inputs(rng):
    m = make_model(2, 3, [rng.uniform(0.6, 1.6, 8), rng.uniform(0.6, 1.6, 8)], [0.5, 0.5], [0.5, 0.5])
    for _ in range(1000):
        g = rng.dirichlet(np.ones(2), size=3)
        t = m.tables[rng.integers(2)]
        for v in (xi(m, g[0]), zf(t, g), zfm(t, rng.integers(3), [g, rng.dirichlet(np.ones(2), size=3)])):
            assert m.psi_min - 1e-12 <= v <= m.psi_max + 1e-12


def test_xi_is_mixture_of_zf(rng):
    m = make_model(2, 3, [rng.uniform(0.6, 1.6, 8), rng.uniform(0.6, 1.6, 8)], [0.3, 0.7], [0.5, 0.5])
    g = random_simplex(rng, 2)
    mix = sum(p * zf(t, [g] * 3) for p, t in zip(m.atom_probs, m.tables))
    assert abs(mix - xi(m, g)) < 1e-12


def test_xi_lipschitz_in_tv(rng):
    m = make_model(3, 3, [rng.uniform(0.5, 1.9, 27)], [1.0], [1 / 3] * 3)
    for _ in range(200):
        g1, g2 = random_simplex(rng, 3), random_simplex(rng, 3)
        tv = 0.5 * np.abs(g1 - g2).sum()
        assert abs(xi(m, g1) - xi(m, g2)) <= 2 * m.k * m.psi_max * tv + 1e-12


# ---------------------------------------------------------------- phi_a

def test_phi_annealed_examples():
    m = make_nae_sat(3, 0.5)
    assert phi_annealed(m, 0) == 0.0
    assert abs(phi_annealed(m, 3) - np.log(0.875)) < 1e-15
    assert abs(phi_annealed(m, 3) + 0.13353) < 1e-5
    c = constant_model(2, 3, [1.5])
    assert abs(phi_annealed(c, 2) - 2 / 3 * np.log(1.5)) < 1e-15
    with pytest.raises(InvalidArgument):
        phi_annealed(m, m.d_max + 1)


def test_phi_annealed_linear():
    m = make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    ds = np.linspace(0, m.d_max, 7)
    vals = [phi_annealed(m, d) for d in ds]
    assert np.allclose(np.diff(vals) / np.diff(ds), np.log(xi_sup(m).value) / m.k, atol=1e-14)


# ---------------------------------------------------------------- serialization

def test_json_round_trip(tmp_path, any_model):
    p = tmp_path / "m.json"
    save_model(any_model, p)
    back = load_model(p)
    assert model_hash(back) == model_hash(any_model)
    assert np.array_equal(back.tables, any_model.tables)


def test_json_schema_keys(any_model):
    d = model_to_dict(any_model)
    assert set(d) == {"q", "k", "psi_min", "gamma_star", "d_max", "atoms"}
    assert all(len(a["table"]) == d["q"] ** d["k"] for a in d["atoms"])


def test_malformed_json_rejected(tmp_path):
    with pytest.raises(InvalidArgument):
        model_from_dict({"q": 2})
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidArgument):
        load_model(p)
    assert json.loads(json.dumps(model_to_dict(sym_model())))["q"] == 2
