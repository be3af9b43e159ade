"""Samplers for the null model, the teacher-student model and the
Nishimori ground truth.

Variables and colors are 0-based.  A factor graph stores wires as an
``(m, k)`` integer array and weights as indices into the model's atoms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidArgument, ResourceLimitError
from .model import ModelSpec, Simplex, as_probs, xi_batch
from .rng import as_generator

COMPOSITION_GUARD = 10 ** 7


@dataclass(frozen=True, eq=False)
class FactorGraph:
    n: int
    wires: np.ndarray
    atoms: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.wires, dtype=np.int64)
        a = np.asarray(self.atoms, dtype=np.int64).reshape(-1)
        if w.size == 0:
            w = w.reshape(0, w.shape[1] if w.ndim == 2 else 0)
        if w.ndim != 2 or w.shape[0] != a.shape[0]:
            raise InvalidArgument("wires must have shape (m, k) with one atom per factor")
        if self.n < 1 or (w.size and (w.min() < 0 or w.max() >= self.n)):
            raise InvalidArgument("wire index out of range")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "wires", w)
        object.__setattr__(self, "atoms", a)

    @property
    def m(self) -> int:
        return int(self.atoms.shape[0])

    def log_tables(self, model: ModelSpec) -> np.ndarray:
        if self.m and self.atoms.max() >= model.n_atoms:
            raise InvalidArgument("atom index out of range for this model")
        if self.m and self.wires.shape[1] != model.k:
            raise InvalidArgument("graph arity does not match the model")
        return np.log(model.tables[self.atoms]) if self.m else np.zeros((0, model.q ** model.k))

    def to_dict(self) -> dict:
        return {"n": self.n, "factors": [{"wires": [int(v) for v in w], "atom": int(a)}
                                         for w, a in zip(self.wires, self.atoms)]}

    @classmethod
    def from_dict(cls, data: dict, k: int | None = None) -> "FactorGraph":
        fs = data["factors"]
        if not fs:
            return cls(int(data["n"]), np.zeros((0, k or 0), dtype=np.int64), np.zeros(0, dtype=np.int64))
        return cls(int(data["n"]), [f["wires"] for f in fs], [f["atom"] for f in fs])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def empty_graph(n: int, k: int) -> FactorGraph:
    return FactorGraph(n, np.zeros((0, k), dtype=np.int64), np.zeros(0, dtype=np.int64))


def color_frequencies(sigma, q: int) -> Simplex:
    """Relative color frequencies of an assignment."""
    s = np.asarray(sigma, dtype=np.int64)
    if s.size == 0 or s.min() < 0 or s.max() >= q:
        raise InvalidArgument("assignment values must lie in [0, q)")
    return Simplex(np.bincount(s, minlength=q) / s.size)


def _check_d(model: ModelSpec, d: float) -> None:
    if not (0.0 <= d <= model.d_max):
        raise InvalidArgument(f"d must lie in [0, d_max={model.d_max}]")


def sample_m(model: ModelSpec, d: float, n: int, rng) -> int:
    """Number of factors, Poisson with mean d n / k."""
    _check_d(model, d)
    return int(as_generator(rng).poisson(d * n / model.k))


def _sample_atoms(model: ModelSpec, size: int, g: np.random.Generator) -> np.ndarray:
    if model.n_atoms == 1:
        return np.zeros(size, dtype=np.int64)
    return g.choice(model.n_atoms, size=size, p=model.atom_probs).astype(np.int64)


def sample_null(model: ModelSpec, n: int, m: int, rng) -> FactorGraph:
    """m i.i.d. factors with uniform wires and weights from the atom law."""
    if n < 1 or m < 0:
        raise InvalidArgument("need n >= 1 and m >= 0")
    g = as_generator(rng)
    wires = g.integers(0, n, size=(m, model.k), dtype=np.int64)
    return FactorGraph(n, wires, _sample_atoms(model, m, g))


def factor_assignment_law(model: ModelSpec, gamma) -> np.ndarray:
    """Law of the colors seen by a planted factor: psi_bar(tau) prod gamma(tau_h) / Xi(gamma)."""
    g = as_probs(gamma, model.q)
    w = np.prod(g[model.digits], axis=1) * model.psi_bar
    return w / w.sum()


def _atom_given_tau(model: ModelSpec) -> np.ndarray:
    """Conditional atom law p(a) psi_a(tau) / psi_bar(tau), shape (A, Q)."""
    return model.atom_probs[:, None] * model.tables / model.psi_bar[None, :]


def sample_teacher_student(model: ModelSpec, sigma, m: int, rng) -> FactorGraph:
    """m i.i.d. factors tilted by their weight at the ground truth ``sigma``.

    Two stages: draw the color tuple from the factor assignment law, then
    wires uniformly inside the matching color classes, then the atom.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    n = sigma.shape[0]
    if m < 0:
        raise InvalidArgument("m must be nonnegative")
    g = as_generator(rng)
    q, k = model.q, model.k
    counts = np.bincount(sigma, minlength=q)
    if counts.shape[0] != q:
        raise InvalidArgument("assignment values must lie in [0, q)")
    lam = factor_assignment_law(model, counts / n)
    taus = g.choice(lam.shape[0], size=m, p=lam)
    colors = model.digits[taus]  # (m, k)
    order = np.argsort(sigma, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    u = g.random((m, k))
    pos = starts[colors] + np.minimum((u * counts[colors]).astype(np.int64), counts[colors] - 1)
    wires = order[pos]
    if model.n_atoms == 1:
        atoms = np.zeros(m, dtype=np.int64)
    else:
        cdf = np.cumsum(_atom_given_tau(model)[:, taus], axis=0)
        ua = g.random(m)
        atoms = np.minimum((ua[None, :] >= cdf).sum(axis=0), model.n_atoms - 1).astype(np.int64)
    return FactorGraph(n, wires.reshape(m, k), atoms)


# ---------------------------------------------------------------- Nishimori ground truth

def compositions(n: int, q: int) -> np.ndarray:
    """All vectors of q nonnegative integers summing to n, lexicographic order."""
    if q == 1:
        return np.array([[n]], dtype=np.int64)
    parts = []
    for first in range(n + 1):
        rest = compositions(n - first, q - 1)
        parts.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(parts)


@dataclass(frozen=True, eq=False)
class NishimoriWeights:
    """Unnormalized class weights of the Nishimori ground truth."""

    n: int
    m: int
    compositions: np.ndarray   # (C, q) color counts
    log_weights: np.ndarray    # log P(sigma_iid in class) + m log Xi(class / n)
    log_counts: np.ndarray     # log multinomial coefficient
    log_norm: float            # log E[Xi(gamma_sigma_iid)^m]

    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_norm)

    def as_dict(self) -> dict:
        return {tuple(int(c) for c in comp): (float(lw), float(np.exp(lc)))
                for comp, lw, lc in zip(self.compositions, self.log_weights, self.log_counts)}


def nishimori_weights(model: ModelSpec, n: int, m: int) -> NishimoriWeights:
    q = model.q
    if comb(n + q - 1, q - 1) > COMPOSITION_GUARD:
        raise ResourceLimitError(f"{comb(n + q - 1, q - 1)} compositions exceed the guard {COMPOSITION_GUARD}")
    comps = compositions(n, q)
    log_counts = gammaln(n + 1) - gammaln(comps + 1).sum(axis=1)
    log_gs = np.log(model.gamma_star.probs)
    log_class = log_counts + (comps * log_gs[None, :]).sum(axis=1)
    log_w = log_class + m * np.log(xi_batch(model, comps / n)) if m else log_class
    return NishimoriWeights(n, m, comps, log_w, log_counts, float(logsumexp(log_w)))


def sample_nishimori(model: ModelSpec, n: int, m: int, rng, weights: NishimoriWeights | None = None) -> np.ndarray:
    """Draw a color class by its Nishimori weight, then a uniform assignment within it."""
    w = weights if weights is not None else nishimori_weights(model, n, m)
    g = as_generator(rng)
    c = g.choice(w.compositions.shape[0], p=w.probabilities())
    base = np.repeat(np.arange(model.q), w.compositions[c])
    return g.permutation(base).astype(np.int64)


def sample_iid(model: ModelSpec, n: int, rng) -> np.ndarray:
    g = as_generator(rng)
    return g.choice(model.q, size=n, p=model.gamma_star.probs).astype(np.int64)
