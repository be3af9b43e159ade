"""Example models and validity witnesses.

A witness exhibits the weight law as a finite mixture of components
``psi = a (1 - b Delta)`` where ``Delta`` is a sum of coordinate-factorized
terms.  ``check_validity`` confirms that the witness reproduces the model
and has the structure under which the positivity functional is nonnegative.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .model import ModelSpec, as_probs, make_model, tuple_digits

MINUS_ONE = "MinusOne"
PLUS_ONE = "PlusOne"
_KEY_DECIMALS = 12


# ---------------------------------------------------------------- constructors

def make_nae_sat(k: int, eps: float, gamma_star=None, d_max: float = 10.0) -> ModelSpec:
    """Soft not-all-equal k-SAT on two colors.

    One atom per pair {x, complement of x}, each with probability 2^(1-k);
    the atom weighs ``eps`` on the pair and 1 elsewhere.
    """
    if k < 2:
        raise InvalidArgument("NAE-SAT needs k >= 2")
    if not (0.0 < eps < 1.0):
        raise InvalidArgument("eps must lie in (0, 1)")
    digits = tuple_digits(2, k)
    tables = []
    for x in digits:
        if x[0] != 0:
            continue
        bad = np.all(digits == x, axis=1) | np.all(digits == 1 - x, axis=1)
        tables.append(np.where(bad, eps, 1.0))
    probs = np.full(len(tables), 2.0 ** (1 - k))
    gs = np.full(2, 0.5) if gamma_star is None else gamma_star
    return make_model(2, k, tables, probs, gs, d_max)


def _spins(k: int) -> np.ndarray:
    """Product of spins for every tau in [2]^k (color 0 -> -1, color 1 -> +1)."""
    return np.prod(2 * tuple_digits(2, k) - 1, axis=1).astype(np.float64)


def kspin_scale(beta: float, j_atoms) -> float:
    """E[cosh(beta J)], the constant mean of the raw k-spin weight."""
    return float(sum(p * np.cosh(beta * v) for v, p in j_atoms))


def make_kspin(k: int, beta: float, j_atoms: Sequence[tuple[float, float]] = ((-1.0, 0.5), (1.0, 0.5)),
               gamma_star=None, d_max: float = 10.0, normalize: bool = True) -> ModelSpec:
    """k-spin model with weights exp(-beta J prod_h s_h) and a symmetric law of J.

    With ``normalize`` (the default) every table is divided by E[cosh(beta J)]
    so that the mean weight is identically 1.  This rescales the partition
    function by a constant and leaves all Gibbs measures unchanged.
    """
    vals = np.array([float(v) for v, _ in j_atoms])
    probs = np.array([float(p) for _, p in j_atoms])
    law = defaultdict(float)
    for v, p in zip(vals, probs):
        law[round(v, _KEY_DECIMALS)] += p
    if any(abs(law.get(round(-v, _KEY_DECIMALS), 0.0) - p) > 1e-12 for v, p in law.items()):
        raise InvalidArgument("the law of J must be symmetric (J and -J equal in law)")
    prod = _spins(k)
    scale = kspin_scale(beta, j_atoms) if normalize else 1.0
    tables = [np.exp(-beta * v * prod) / scale for v in vals]
    gs = np.full(2, 0.5) if gamma_star is None else gamma_star
    return make_model(2, k, tables, probs, gs, d_max)


def sbm_coefficients(q: int, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross):
    """Return (b1, b2, classes) for the composed block model."""
    c1 = sorted(int(c) for c in part[0])
    c2 = sorted(int(c) for c in part[1])
    if not c1 or not c2 or sorted(c1 + c2) != list(range(q)):
        raise InvalidArgument("part must split [q] into two nonempty classes")
    if not (c_eq1 <= c_neq1 <= c_cross and c_eq2 <= c_neq2 <= c_cross):
        raise InvalidArgument("need c_eq_i <= c_neq_i <= c_cross")
    if min(c_eq1, c_eq2) <= 0:
        raise InvalidArgument("weights must be positive")
    b1 = (c_cross - c_neq1) + (c_neq1 - c_eq1) / len(c1)
    b2 = (c_cross - c_neq2) + (c_neq2 - c_eq2) / len(c2)
    return b1, b2, (c1, c2)


def sbm_maximizer(q: int, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross) -> np.ndarray:
    """Closed-form maximizer: class-1 mass b2/(b1+b2), uniform inside classes."""
    b1, b2, (c1, c2) = sbm_coefficients(q, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross)
    if b1 + b2 == 0:
        return np.full(q, 1.0 / q)
    x = b2 / (b1 + b2)
    g = np.zeros(q)
    g[c1] = x / len(c1)
    g[c2] = (1 - x) / len(c2)
    return g


def make_composed_sbm(q: int, part, c_eq1: float, c_neq1: float, c_eq2: float, c_neq2: float,
                      c_cross: float, d_max: float = 10.0) -> ModelSpec:
    """Two-type block model; gamma* is set to the closed-form maximizer."""
    _, _, (c1, c2) = sbm_coefficients(q, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross)
    cls = np.zeros(q, dtype=int)
    cls[c2] = 1
    table = np.empty((q, q))
    for s, t in itertools.product(range(q), repeat=2):
        if cls[s] != cls[t]:
            table[s, t] = c_cross
        elif cls[s] == 0:
            table[s, t] = c_eq1 if s == t else c_neq1
        else:
            table[s, t] = c_eq2 if s == t else c_neq2
    gs = sbm_maximizer(q, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross)
    return make_model(q, 2, [table.reshape(-1)], [1.0], gs, d_max)


@dataclass(frozen=True, eq=False)
class ChannelKernel:
    """Conditional law nu_y over [q_out] for each input tuple y in [q]^k."""

    q: int
    k: int
    q_out: int
    nu: np.ndarray
    p_star: np.ndarray

    def __post_init__(self):
        nu = np.array(self.nu, dtype=np.float64).reshape(self.q ** self.k, self.q_out)
        if np.any(nu <= 0) or np.max(np.abs(nu.sum(axis=1) - 1)) > 1e-12:
            raise InvalidArgument("every nu_y must be a fully supported distribution")
        ps = as_probs(self.p_star, self.q_out, "p_star")
        if np.any(ps <= 0):
            raise InvalidArgument("p_star must be fully supported")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "p_star", ps)


def make_graphical_channel(kernel: ChannelKernel, gamma_star=None, d_max: float = 10.0) -> ModelSpec:
    """Atom z has probability p*(z) and table y -> nu_y(z) / p*(z)."""
    tables = (kernel.nu / kernel.p_star[None, :]).T
    for i, j in itertools.combinations(range(tables.shape[0]), 2):
        if np.max(np.abs(tables[i] - tables[j])) <= 1e-12:
            raise InvalidArgument(
                f"channel outputs {i} and {j} give identical weight tables; "
                "perturb p_star or merge the outputs")
    gs = np.full(kernel.q, 1.0 / kernel.q) if gamma_star is None else gamma_star
    return make_model(kernel.q, kernel.k, tables, kernel.p_star, gs, d_max)


def bsc_kernel(k: int, eta: float, p_star=(0.5, 0.5)) -> ChannelKernel:
    """Parity of k input bits sent through a binary symmetric channel."""
    if not (0.0 < eta < 1.0):
        raise InvalidArgument("eta must lie in (0, 1)")
    parity = tuple_digits(2, k).sum(axis=1) % 2
    nu = np.where(parity[:, None] == np.arange(2)[None, :], 1 - eta, eta)
    return ChannelKernel(2, k, 2, nu, np.asarray(p_star, dtype=np.float64))


def make_bsc_channel(k: int, eta: float, p_star=(0.5, 0.5), d_max: float = 10.0) -> ModelSpec:
    return make_graphical_channel(bsc_kernel(k, eta, p_star), d_max=d_max)


# ---------------------------------------------------------------- witnesses

@dataclass(frozen=True, eq=False)
class WitnessComponent:
    """psi = a (1 - b Delta) with Delta(tau) = sum_t prod_h factors[t, h, tau_h]."""

    a: float
    b: float
    factors: np.ndarray  # shape (terms, k, q)

    def __post_init__(self):
        f = np.array(self.factors, dtype=np.float64)
        if f.ndim != 3:
            raise InvalidArgument("factors must have shape (terms, k, q)")
        if not self.a > 0:
            raise InvalidArgument("a must be positive")
        object.__setattr__(self, "factors", f)

    def delta(self) -> np.ndarray:
        t, k, q = self.factors.shape
        digits = tuple_digits(q, k)
        out = np.zeros(q ** k)
        for term in self.factors:
            out += np.prod(term[np.arange(k)[None, :], digits], axis=1)
        return out

    def table(self) -> np.ndarray:
        return self.a * (1.0 - self.b * self.delta())


@dataclass(frozen=True, eq=False)
class ValidityWitness:
    kind: str
    components: tuple
    mixture_probs: np.ndarray

    def __post_init__(self):
        if self.kind not in (MINUS_ONE, PLUS_ONE):
            raise InvalidArgument(f"kind must be {MINUS_ONE!r} or {PLUS_ONE!r}")
        comps = tuple(self.components)
        p = np.asarray(self.mixture_probs, dtype=np.float64)
        if len(comps) == 0 or p.shape != (len(comps),):
            raise InvalidArgument("one mixture probability per component is required")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
            raise InvalidArgument("mixture probabilities must be positive and sum to 1")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "mixture_probs", p)


def _key(x) -> tuple:
    return tuple(np.round(np.asarray(x, dtype=np.float64).reshape(-1), _KEY_DECIMALS) + 0.0)


def _laws_match(a: dict, b: dict, tol: float = 1e-12) -> bool:
    keys = set(a) | set(b)
    return all(abs(a.get(x, 0.0) - b.get(x, 0.0)) <= tol for x in keys)


def _reconstructs(model: ModelSpec, witness: ValidityWitness, tol: float = 1e-10) -> bool:
    tables = model.tables
    # group equal model atoms so duplicate tables are handled
    rep = list(range(model.n_atoms))
    for i in range(model.n_atoms):
        for j in range(i):
            if np.max(np.abs(tables[i] - tables[j])) <= tol:
                rep[i] = rep[j]
                break
    target = defaultdict(float)
    for i, p in enumerate(model.atom_probs):
        target[rep[i]] += p
    got = defaultdict(float)
    for comp, p in zip(witness.components, witness.mixture_probs):
        t = comp.table()
        hits = [i for i in set(rep) if np.max(np.abs(tables[i] - t)) <= tol]
        if not hits:
            return False
        got[hits[0]] += p
    return all(abs(got[i] - target[i]) <= tol for i in set(rep))


def _structure_ok(witness: ValidityWitness, k: int) -> bool:
    groups = defaultdict(list)
    for comp, p in zip(witness.components, witness.mixture_probs):
        groups[round(comp.a, _KEY_DECIMALS)].append((comp, p))
    for members in groups.values():
        total = sum(p for _, p in members)
        law_b = defaultdict(float)
        law_f = defaultdict(float)  # common per-coordinate law of the factor sequence
        joint = defaultdict(float)
        for comp, p in members:
            w = p / total
            f = comp.factors
            law_b[round(comp.b, _KEY_DECIMALS) + 0.0] += w
            fk = tuple(_key(f[:, h, :]) for h in range(k))
            for h in range(k):
                law_f[fk[h]] += w / k
            joint[(round(comp.b, _KEY_DECIMALS) + 0.0,) + fk] += w
        # every coordinate must carry the common law
        for h in range(k):
            law_h = defaultdict(float)
            for key, w in joint.items():
                law_h[key[1 + h]] += w
            if not _laws_match(law_h, law_f):
                return False
        # b independent of the factors, coordinates i.i.d.
        product = defaultdict(float)
        for bval, pb in law_b.items():
            for combo in itertools.product(law_f.items(), repeat=k):
                w = pb
                for _, pf in combo:
                    w *= pf
                product[(bval,) + tuple(c for c, _ in combo)] += w
        if not _laws_match(joint, product):
            return False
        if witness.kind == MINUS_ONE:
            if not _laws_match(law_b, {-x + 0.0: v for x, v in law_b.items()}):
                return False
    return True


def check_validity(model: ModelSpec, witness: ValidityWitness) -> bool:
    """True iff the witness reproduces the model and has valid structure."""
    for comp in witness.components:
        if comp.factors.shape[1:] != (model.k, model.q):
            raise InvalidArgument(f"witness factors must have shape (terms, {model.k}, {model.q})")
    for comp in witness.components:
        if witness.kind == MINUS_ONE and comp.factors.shape[0] != 1:
            return False
        if witness.kind == PLUS_ONE and (np.any(comp.factors < 0) or comp.b < 0):
            return False
        if np.max(np.abs(comp.b * comp.delta())) >= 1.0:
            return False
    if not _reconstructs(model, witness):
        return False
    return _structure_ok(witness, model.k)


def nae_sat_witness(k: int, eps: float) -> ValidityWitness:
    """Witness with x uniform on {0,1}^k, a = 1, b = 1 - eps and indicator factors."""
    comps = []
    for x in tuple_digits(2, k):
        f = np.zeros((2, k, 2))
        f[0, np.arange(k), x] = 1.0
        f[1, np.arange(k), 1 - x] = 1.0
        comps.append(WitnessComponent(1.0, 1.0 - eps, f))
    return ValidityWitness(PLUS_ONE, comps, np.full(len(comps), 2.0 ** -k))


def kspin_witness(k: int, beta: float, j_atoms=((-1.0, 0.5), (1.0, 0.5)),
                  normalize: bool = True) -> ValidityWitness:
    """Witness with a = cosh(beta J) (over the normalizing scale), b = tanh(beta J)."""
    f = np.array([[[-1.0, 1.0]] * k])
    scale = kspin_scale(beta, j_atoms) if normalize else 1.0
    comps = [WitnessComponent(float(np.cosh(beta * v) / scale), float(np.tanh(beta * v)), f)
             for v, _ in j_atoms]
    return ValidityWitness(MINUS_ONE, comps, [p for _, p in j_atoms])


def sbm_witness(q: int, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross) -> ValidityWitness:
    """Single component with a = c_cross, b = 1 and scaled class indicators."""
    _, _, classes = sbm_coefficients(q, part, c_eq1, c_neq1, c_eq2, c_neq2, c_cross)
    k = 2
    terms = []
    for cls, c_eq, c_neq in zip(classes, (c_eq1, c_eq2), (c_neq1, c_neq2)):
        ind = np.zeros(q)
        ind[cls] = 1.0
        terms.append(np.tile(((c_cross - c_neq) / c_cross) ** (1 / k) * ind, (k, 1)))
        for s in cls:
            e = np.zeros(q)
            e[s] = 1.0
            terms.append(np.tile(((c_neq - c_eq) / c_cross) ** (1 / k) * e, (k, 1)))
    return ValidityWitness(PLUS_ONE, [WitnessComponent(c_cross, 1.0, np.array(terms))], [1.0])


def bsc_witness(k: int, eta: float) -> ValidityWitness:
    """Witness for the parity channel with uniform p*: a = 1, b = -/+ (1 - 2 eta)."""
    f = np.array([[[-1.0, 1.0]] * k])
    s = 1 if k % 2 == 0 else -1  # sign of prod_h s_h on even-parity inputs
    comps = [WitnessComponent(1.0, -s * (1 - 2 * eta), f), WitnessComponent(1.0, s * (1 - 2 * eta), f)]
    return ValidityWitness(MINUS_ONE, comps, [0.5, 0.5])


def witness_to_dict(w: ValidityWitness) -> dict:
    return {
        "kind": w.kind,
        "mixture_probs": [float(p) for p in w.mixture_probs],
        "components": [{"a": c.a, "b": c.b, "factors": c.factors.tolist()} for c in w.components],
    }


def witness_from_dict(data: dict) -> ValidityWitness:
    try:
        comps = [WitnessComponent(float(c["a"]), float(c["b"]), np.asarray(c["factors"], dtype=np.float64))
                 for c in data["components"]]
        return ValidityWitness(data["kind"], comps, data["mixture_probs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed witness: {exc}") from exc


ZOO_NAMES = ("nae-sat", "kspin", "sbm", "bsc-channel", "constant")


def zoo_model(name: str, **params) -> ModelSpec:
    """Build a zoo model by short name (used by the command line)."""
    name = name.lower().replace("_", "-")
    if name == "nae-sat":
        return make_nae_sat(params.get("k", 3), params.get("eps", 0.5))
    if name == "kspin":
        return make_kspin(params.get("k", 2), params.get("beta", 0.5))
    if name == "sbm":
        return make_composed_sbm(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    if name == "bsc-channel":
        return make_bsc_channel(params.get("k", 3), params.get("eta", 0.1))
    if name == "constant":
        return constant_from_params(params)
    raise InvalidArgument(f"unknown zoo model {name!r}")


def constant_from_params(params: dict) -> ModelSpec:
    from .model import constant_model
    values = params.get("c_values") or [params.get("c", 1.0)]
    return constant_model(params.get("q", 2), params.get("k", 2), values, params.get("c_probs"))


def zoo_witness(name: str, **params) -> ValidityWitness | None:
    """Validity witness matching ``zoo_model(name, **params)``, or None for constant models."""
    name = name.lower().replace("_", "-")
    if name == "nae-sat":
        return nae_sat_witness(params.get("k", 3), params.get("eps", 0.5))
    if name == "kspin":
        return kspin_witness(params.get("k", 2), params.get("beta", 0.5))
    if name == "sbm":
        return sbm_witness(3, ([0], [1, 2]), 0.5, 1.0, 0.5, 1.0, 1.0)
    if name == "bsc-channel":
        return bsc_witness(params.get("k", 3), params.get("eta", 0.1))
    if name == "constant":
        return None
    raise InvalidArgument(f"unknown zoo model {name!r}")
