"""Brute-force ground truth at tiny sizes.

The graph space of m factors on n variables is enumerated cell by cell.  A
cell is one (wire tuple, atom) pair; its index is ``wire_index * A + atom``
with the wire tuple ranked row-major over ``[n]^k``.  A graph is a tuple of
m cells, ranked row-major with factor 0 most significant.  Assignments are
ranked row-major over ``[q]^n`` with variable 0 most significant.

Mutual information and relative entropies are reported per variable.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import InvalidArgument, ResourceLimitError
from .graphs import FactorGraph, nishimori_weights
from .model import ModelSpec, tuple_digits, xi_batch

PARTITION_GUARD = 10 ** 8
JOINT_GUARD = 10 ** 7


@dataclass(frozen=True, eq=False)
class DenseMeasure:
    """A probability measure on [q]^n stored as a flat row-major vector."""

    n: int
    q: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.q ** self.n:
            raise InvalidArgument("probs must have length q**n")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise InvalidArgument("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)

    def tensor(self) -> np.ndarray:
        return self.probs.reshape((self.q,) * self.n)

    def marginal(self, variables) -> np.ndarray:
        """Joint law of the listed (distinct) variables, axes in the given order."""
        variables = list(variables)
        rest = tuple(i for i in range(self.n) if i not in variables)
        t = self.tensor().sum(axis=rest) if rest else self.tensor()
        kept = sorted(variables)
        return np.transpose(t, [kept.index(v) for v in variables]) if variables else t

    @classmethod
    def product(cls, marginals) -> "DenseMeasure":
        p = np.ones(1)
        for g in marginals:
            p = np.multiply.outer(p, np.asarray(g, dtype=np.float64)).reshape(-1)
        return cls(len(marginals), len(marginals[0]), p)


def _kl(p: np.ndarray, logp: np.ndarray, logq: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * (logp[mask] - logq[mask])))


def _check_guard(size: int, guard: int, what: str) -> None:
    if size > guard:
        raise ResourceLimitError(f"{what} needs {size} cells, above the guard {guard}")


# ---------------------------------------------------------------- single graphs

def log_assignment_weights(model: ModelSpec, graph: FactorGraph) -> np.ndarray:
    """log(gamma*^n(sigma) psi_G(sigma)) for every assignment."""
    _check_guard(model.q ** graph.n, PARTITION_GUARD, "partition function")
    wires = graph.wires if graph.m else np.zeros((0, model.k), dtype=np.int64)
    return kernels.assignment_log_weights(graph.n, model.q, wires, graph.log_tables(model),
                                          np.log(model.gamma_star.probs))


def log_partition_function(model: ModelSpec, graph: FactorGraph) -> float:
    return float(logsumexp(log_assignment_weights(model, graph)))


def partition_function(model: ModelSpec, graph: FactorGraph) -> float:
    """Z(G) = sum over sigma of gamma*^n(sigma) psi_G(sigma)."""
    return float(np.exp(log_partition_function(model, graph)))


def gibbs_measure(model: ModelSpec, graph: FactorGraph) -> DenseMeasure:
    lw = log_assignment_weights(model, graph)
    p = np.exp(lw - logsumexp(lw))
    return DenseMeasure(graph.n, model.q, p / p.sum())


def free_entropy(model: ModelSpec, graph: FactorGraph) -> float:
    """(1/n) ln Z(G)."""
    if graph.m == 0:
        return 0.0  # the prior sums to one
    return log_partition_function(model, graph) / graph.n


# ---------------------------------------------------------------- graph space

class GraphSpace:
    """All graphs with m factors on n variables, with their null-model law."""

    def __init__(self, model: ModelSpec, n: int, m: int, guard: int = JOINT_GUARD):
        if n < 1 or m < 0:
            raise InvalidArgument("need n >= 1 and m >= 0")
        self.model, self.n, self.m = model, n, m
        self.cells = n ** model.k * model.n_atoms
        self.size = self.cells ** m
        _check_guard(model.q ** n * self.size, guard, "graph-space enumeration")

    @cached_property
    def assignments(self) -> np.ndarray:
        return tuple_digits(self.model.q, self.n)

    @cached_property
    def wire_tuples(self) -> np.ndarray:
        return tuple_digits(self.n, self.model.k)

    @cached_property
    def cell_log_weights(self) -> np.ndarray:
        """log psi_atom(sigma_v) indexed by (assignment, cell)."""
        q, k = self.model.q, self.model.k
        idx = np.zeros((self.assignments.shape[0], self.wire_tuples.shape[0]), dtype=np.int64)
        for h in range(k):
            idx = idx * q + self.assignments[:, self.wire_tuples[:, h]]
        logt = np.log(self.model.tables)  # (A, Q)
        return np.transpose(logt[:, idx], (1, 2, 0)).reshape(self.assignments.shape[0], self.cells)

    @cached_property
    def cell_log_probs(self) -> np.ndarray:
        lp = np.log(self.model.atom_probs) - self.model.k * np.log(self.n)
        return np.tile(lp, self.n ** self.model.k)

    @cached_property
    def log_psi(self) -> np.ndarray:
        """log psi_G(sigma) for all (assignment, graph)."""
        out = np.zeros((self.assignments.shape[0], 1))
        for _ in range(self.m):
            out = (out[:, :, None] + self.cell_log_weights[:, None, :]).reshape(out.shape[0], -1)
        return out

    @cached_property
    def log_null(self) -> np.ndarray:
        out = np.zeros(1)
        for _ in range(self.m):
            out = (out[:, None] + self.cell_log_probs[None, :]).reshape(-1)
        return out

    @cached_property
    def log_prior(self) -> np.ndarray:
        return np.log(self.model.gamma_star.probs)[self.assignments].sum(axis=1)

    @cached_property
    def log_z(self) -> np.ndarray:
        """log Z(G) for every graph."""
        return logsumexp(self.log_prior[:, None] + self.log_psi, axis=0)

    @cached_property
    def log_gibbs(self) -> np.ndarray:
        """log mu_G(sigma), indexed by (assignment, graph)."""
        return self.log_prior[:, None] + self.log_psi - self.log_z[None, :]

    @cached_property
    def log_xi_m(self) -> np.ndarray:
        """m ln Xi(gamma_sigma) for every assignment."""
        if self.m == 0:
            return np.zeros(self.assignments.shape[0])
        freq = np.stack([np.bincount(s, minlength=self.model.q) for s in self.assignments]) / self.n
        return self.m * np.log(xi_batch(self.model, freq))

    def graph(self, index: int) -> FactorGraph:
        cells = np.unravel_index(index, (self.cells,) * self.m) if self.m else ()
        A = self.model.n_atoms
        wires = [self.wire_tuples[c // A] for c in cells]
        atoms = [c % A for c in cells]
        if not cells:
            return FactorGraph(self.n, np.zeros((0, self.model.k), dtype=np.int64), np.zeros(0, dtype=np.int64))
        return FactorGraph(self.n, np.array(wires), np.array(atoms))


@dataclass(frozen=True, eq=False)
class JointLaw:
    """Exact law of (sigma_iid, G*(sigma_iid)), shape (q**n, graphs)."""

    space: GraphSpace
    log_probs: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)


def exact_joint_law(model: ModelSpec, n: int, m: int) -> JointLaw:
    """Factor-first construction: each factor independently tilted by psi(sigma_v)/Xi(gamma_sigma)."""
    sp = GraphSpace(model, n, m)
    per_factor = sp.cell_log_weights + sp.cell_log_probs[None, :]
    if m:
        per_factor = per_factor - (sp.log_xi_m / m)[:, None]
    lp = sp.log_prior[:, None] + np.zeros((1, 1))
    for _ in range(m):
        lp = (lp[:, :, None] + per_factor[:, None, :]).reshape(lp.shape[0], -1)
    return JointLaw(sp, lp)


def joint_law_graph_first(model: ModelSpec, n: int, m: int) -> np.ndarray:
    """Same law built from the null graph law and brute-force first moments."""
    sp = GraphSpace(model, n, m)
    log_first = logsumexp(sp.log_null[None, :] + sp.log_psi, axis=1)
    return np.exp(sp.log_null[None, :] + sp.log_prior[:, None] + sp.log_psi - log_first[:, None])


def first_moment_residual(model: ModelSpec, n: int, m: int) -> float:
    """max over sigma of |E[gamma*^n(sigma) psi_G(sigma)] - gamma*^n(sigma) Xi(gamma_sigma)^m|."""
    sp = GraphSpace(model, n, m)
    lhs = np.exp(sp.log_prior + logsumexp(sp.log_null[None, :] + sp.log_psi, axis=1))
    rhs = np.exp(sp.log_prior + sp.log_xi_m)
    return float(np.max(np.abs(lhs - rhs)))


def product_law_tv(model: ModelSpec, n: int, m: int) -> float:
    """max over sigma of TV between the enumerated planted graph law and the product of tilted factors."""
    sp = GraphSpace(model, n, m)
    direct = sp.log_null[None, :] + sp.log_psi
    direct = np.exp(direct - logsumexp(direct, axis=1, keepdims=True))
    one = sp.cell_log_weights + sp.cell_log_probs[None, :]
    one = np.exp(one - logsumexp(one, axis=1, keepdims=True))
    prod = np.ones((one.shape[0], 1))
    for _ in range(m):
        prod = (prod[:, :, None] * one[:, None, :]).reshape(one.shape[0], -1)
    return float(0.5 * np.abs(direct - prod).sum(axis=1).max())


def exact_mutual_information(model: ModelSpec, n: int, m: int) -> float:
    """(1/n) I(sigma_iid; G*(sigma_iid)) from the joint law."""
    law = exact_joint_law(model, n, m)
    lp = law.log_probs
    p = np.exp(lp)
    log_ps = logsumexp(lp, axis=1)
    log_pg = logsumexp(lp, axis=0)
    return _kl(p, lp, log_ps[:, None] + log_pg[None, :]) / n


@dataclass(frozen=True)
class MIDecomposition:
    h_gamma_star: float
    eta_bar: float
    delta_bar: float

    @property
    def combined(self) -> float:
        return self.h_gamma_star - self.eta_bar + self.delta_bar


def mi_decomposition(model: ModelSpec, n: int, m: int) -> MIDecomposition:
    """Entropy of gamma*, cross entropy and relative entropy of the posterior against the Gibbs measure."""
    law = exact_joint_law(model, n, m)
    sp = law.space
    lp = law.log_probs
    p = np.exp(lp)
    log_pg = logsumexp(lp, axis=0)
    log_post = lp - log_pg[None, :]
    gs = model.gamma_star.probs
    h = float(-(gs * np.log(gs)).sum())
    mask = p > 0
    eta = float(-(p[mask] * sp.log_gibbs[mask]).sum()) / n
    delta = float((p[mask] * (log_post[mask] - sp.log_gibbs[mask])).sum()) / n
    return MIDecomposition(h, eta, delta)


@dataclass(frozen=True)
class RelativeEntropyReport:
    direct: float          # (1/n) D((sigma_iid, G*(sigma_iid)) || (Gibbs sample of G, G))
    phi_star: float        # E[(1/n) ln Z(G*(sigma_iid))]
    phi_annealed: float    # (1/n) ln E[Z(G)]
    delta_prime: float     # (1/n) D(sigma_iid || Nishimori ground truth)

    @property
    def identity(self) -> float:
        return self.phi_star - self.phi_annealed + self.delta_prime

    @property
    def residual(self) -> float:
        return abs(self.direct - self.identity)


def exact_relative_entropy(model: ModelSpec, n: int, m: int) -> RelativeEntropyReport:
    law = exact_joint_law(model, n, m)
    sp = law.space
    lp = law.log_probs
    p = np.exp(lp)
    log_q = sp.log_null[None, :] + sp.log_gibbs
    direct = _kl(p, lp, log_q) / n
    pg = p.sum(axis=0)
    phi_star = float(pg @ sp.log_z) / n
    nw = nishimori_weights(model, n, m)
    phi_a = nw.log_norm / n
    # D(sigma_iid || sigma_hat) = E[ln E Xi^m - m ln Xi(gamma_sigma)]
    prior = np.exp(sp.log_prior)
    delta_prime = float(prior @ (nw.log_norm - sp.log_xi_m)) / n
    return RelativeEntropyReport(direct, phi_star, phi_a, delta_prime)


def nishimori_joint(model: ModelSpec, n: int, m: int) -> tuple[GraphSpace, np.ndarray]:
    """log P(sigma_hat = sigma, G*(sigma_hat) = G) on the graph space."""
    law = exact_joint_law(model, n, m)
    sp = law.space
    log_shift = sp.log_xi_m - nishimori_weights(model, n, m).log_norm
    return sp, law.log_probs + log_shift[:, None]


def verify_nishimori(model: ModelSpec, n: int, m: int) -> float:
    """TV between (sigma_hat, G*(sigma_hat)) and (Gibbs sample of G*(sigma_hat), same graph)."""
    sp, lp = nishimori_joint(model, n, m)
    p = np.exp(lp)
    pg = p.sum(axis=0)
    other = pg[None, :] * np.exp(sp.log_gibbs)
    return float(0.5 * np.abs(p - other).sum())


@dataclass(frozen=True)
class JensenReport:
    phi_planted: float     # E (1/n) ln Z(G*(sigma_hat))
    phi_null: float        # E (1/n) ln Z(G)
    phi_annealed: float    # (1/n) ln E Z(G)
    d_planted_null: float  # (1/n) D(G*(sigma_hat) || G)
    d_null_planted: float  # (1/n) D(G || G*(sigma_hat))

    @property
    def residual_planted(self) -> float:
        return abs(self.phi_planted - (self.phi_annealed + self.d_planted_null))

    @property
    def residual_null(self) -> float:
        return abs(self.phi_null - (self.phi_annealed - self.d_null_planted))


def jensen_identities(model: ModelSpec, n: int, m: int) -> JensenReport:
    sp, lp = nishimori_joint(model, n, m)
    log_planted = logsumexp(lp, axis=0)
    planted = np.exp(log_planted)
    null = np.exp(sp.log_null)
    phi_a = nishimori_weights(model, n, m).log_norm / n
    return JensenReport(
        phi_planted=float(planted @ sp.log_z) / n,
        phi_null=float(null @ sp.log_z) / n,
        phi_annealed=phi_a,
        d_planted_null=_kl(planted, log_planted, sp.log_null) / n,
        d_null_planted=_kl(null, sp.log_null, log_planted) / n,
    )


def gibbs_bounds_violation(model: ModelSpec, n: int, m: int) -> float:
    """Largest violation of psi_min^(2m) <= mu_G(sigma) / P(sigma_iid = sigma) <= psi_max^(2m)."""
    sp = GraphSpace(model, n, m)
    ratio = sp.log_gibbs - sp.log_prior[:, None]
    lo = 2 * m * np.log(model.psi_min)
    hi = 2 * m * np.log(model.psi_max)
    return float(max(0.0, lo - ratio.min(), ratio.max() - hi))


def audit(model: ModelSpec, n: int, m: int) -> list[tuple[str, float]]:
    """All exact identities as (name, residual) rows."""
    joint = exact_joint_law(model, n, m)
    rows = [
        ("nishimori_tv", verify_nishimori(model, n, m)),
        ("mi_decomposition", abs(exact_mutual_information(model, n, m) - mi_decomposition(model, n, m).combined)),
        ("relative_entropy_identity", exact_relative_entropy(model, n, m).residual),
        ("product_law_tv", product_law_tv(model, n, m)),
        ("first_moment", first_moment_residual(model, n, m)),
        ("joint_law_double_enumeration", float(np.abs(joint.probs - joint_law_graph_first(model, n, m)).max())),
        ("joint_law_normalization", abs(float(joint.probs.sum()) - 1.0)),
    ]
    jr = jensen_identities(model, n, m)
    rows += [("jensen_planted", jr.residual_planted), ("jensen_null", jr.residual_null),
             ("gibbs_bounds", gibbs_bounds_violation(model, n, m))]
    return rows
