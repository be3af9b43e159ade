"""Model representation and the deterministic functionals built on it.

Conventions: colors are ``0..q-1``, coordinates of a factor are ``0..k-1``
and a weight table over ``[q]^k`` is stored row-major with coordinate 0 most
significant.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import InvalidArgument

SUM_TOL = 1e-12
RENORM_TOL = 1e-9
BOUND_TOL = 1e-12


def xlnx(x):
    """x ln x with the convention 0 ln 0 = 0."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return out if out.ndim else float(out)


def tuple_digits(q: int, k: int) -> np.ndarray:
    """All tuples of [q]^k in table order, shape (q**k, k)."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.stack(np.unravel_index(np.arange(q ** k), (q,) * k), axis=1).astype(np.int64)


def as_probs(x, q: int | None = None, name: str = "gamma") -> np.ndarray:
    """Validate a probability vector; renormalize if the sum is off by at most 1e-9."""
    if isinstance(x, Simplex):
        x = x.probs
    p = np.array(x, dtype=np.float64, copy=True).reshape(-1)
    if q is not None and p.shape[0] != q:
        raise InvalidArgument(f"{name} has dimension {p.shape[0]}, expected {q}")
    if p.size == 0 or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidArgument(f"{name} must be a nonempty nonnegative finite vector")
    s = p.sum()
    if abs(s - 1.0) > RENORM_TOL:
        raise InvalidArgument(f"{name} sums to {s!r}, not 1")
    if s != 1.0:
        p = p / s
    return p


@dataclass(frozen=True, eq=False)
class Simplex:
    """A point of the probability simplex over [q]."""

    probs: np.ndarray

    def __post_init__(self):
        p = as_probs(self.probs, name="simplex point")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def q(self) -> int:
        return self.probs.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.probs, dtype=dtype)

    def __repr__(self) -> str:
        return f"Simplex({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A weight table over [q]^k."""

    q: int
    k: int
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64, copy=True).reshape(-1)
        if t.shape[0] != self.q ** self.k:
            raise InvalidArgument(f"table has {t.shape[0]} entries, expected q**k = {self.q ** self.k}")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise InvalidArgument("weight tables must be finite and positive")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __call__(self, tau: Sequence[int]) -> float:
        idx = 0
        for c in tau:
            idx = idx * self.q + int(c)
        return float(self.table[idx])


@dataclass(frozen=True, eq=False)
class WeightDistribution:
    """Finitely supported law of the weight function."""

    atoms: tuple
    probs: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise InvalidArgument("weight distribution needs at least one atom")
        p = np.array(self.probs, dtype=np.float64, copy=True).reshape(-1)
        if p.shape[0] != len(atoms):
            raise InvalidArgument("one probability per atom is required")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise InvalidArgument("atom probabilities must be positive")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidArgument(f"atom probabilities sum to {p.sum()!r}, not 1")
        q, k = atoms[0].q, atoms[0].k
        if any(a.q != q or a.k != k for a in atoms):
            raise InvalidArgument("all atoms must share q and k")
        p.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", p)

    @property
    def tables(self) -> np.ndarray:
        return np.stack([a.table for a in self.atoms])


class XiSup(NamedTuple):
    value: float
    maximizer: Simplex


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A complete model: colors, arity, weight law, ground truth and degree bound."""

    q: int
    k: int
    weights: WeightDistribution
    gamma_star: Simplex
    d_max: float
    psi_min: float

    def __post_init__(self):
        q, k = int(self.q), int(self.k)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "k", k)
        if q < 1 or k < 1:
            raise InvalidArgument("need q >= 1 and k >= 1")
        if not isinstance(self.weights, WeightDistribution):
            raise InvalidArgument("weights must be a WeightDistribution")
        if self.weights.atoms[0].q != q or self.weights.atoms[0].k != k:
            raise InvalidArgument("atom dimensions do not match (q, k)")
        gs = self.gamma_star if isinstance(self.gamma_star, Simplex) else Simplex(self.gamma_star)
        if gs.q != q:
            raise InvalidArgument("gamma_star has the wrong dimension")
        object.__setattr__(self, "gamma_star", gs)
        psi_min = float(self.psi_min)
        if not (0.0 < psi_min < 1.0 / q):
            raise InvalidArgument(f"psi_min must lie in (0, 1/q), got {psi_min!r}")
        object.__setattr__(self, "psi_min", psi_min)
        d_max = float(self.d_max)
        if not (d_max > 0 and np.isfinite(d_max)):
            raise InvalidArgument("d_max must be positive and finite")
        object.__setattr__(self, "d_max", d_max)
        t = self.tables
        if t.min() < psi_min * (1 - BOUND_TOL) or t.max() > self.psi_max * (1 + BOUND_TOL):
            raise InvalidArgument("weight table entries outside [psi_min, psi_max]")
        if gs.probs.min() < psi_min * (1 - BOUND_TOL):
            raise InvalidArgument("gamma_star must be >= psi_min componentwise")

    @property
    def psi_max(self) -> float:
        return 1.0 / self.psi_min

    @cached_property
    def tables(self) -> np.ndarray:
        t = self.weights.tables
        t.setflags(write=False)
        return t

    @property
    def atom_probs(self) -> np.ndarray:
        return self.weights.probs

    @property
    def n_atoms(self) -> int:
        return len(self.weights.atoms)

    @cached_property
    def psi_bar(self) -> np.ndarray:
        """Mean weight table E[psi]."""
        pb = self.atom_probs @ self.tables
        pb.setflags(write=False)
        return pb

    @cached_property
    def digits(self) -> np.ndarray:
        return tuple_digits(self.q, self.k)

    @cached_property
    def _xi_sup(self) -> XiSup:
        return _solve_xi_sup(self)


def make_model(q: int, k: int, tables, probs, gamma_star, d_max: float = 10.0,
               psi_min: float | None = None) -> ModelSpec:
    """Convenience constructor from raw arrays.

    When ``psi_min`` is omitted it is set to 0.99 times the largest value
    compatible with the tables, ``gamma_star`` and the bound ``psi_min < 1/q``.
    """
    tables = np.atleast_2d(np.asarray(tables, dtype=np.float64))
    gs = as_probs(gamma_star, q, "gamma_star")
    if psi_min is None:
        psi_min = 0.99 * min(tables.min(), 1.0 / tables.max(), gs.min(), 1.0 / q)
    atoms = tuple(WeightFunction(q, k, t) for t in tables)
    return ModelSpec(q, k, WeightDistribution(atoms, probs), Simplex(gs), d_max, psi_min)


def constant_model(q: int, k: int, c_values, c_probs=None, gamma_star=None,
                   d_max: float = 10.0) -> ModelSpec:
    """Model whose weights are constant tables psi = c with c drawn from a finite law."""
    c_values = np.atleast_1d(np.asarray(c_values, dtype=np.float64))
    if c_probs is None:
        c_probs = np.full(c_values.shape[0], 1.0 / c_values.shape[0])
    gs = np.full(q, 1.0 / q) if gamma_star is None else gamma_star
    tables = np.repeat(c_values[:, None], q ** k, axis=1)
    return make_model(q, k, tables, c_probs, gs, d_max)


# ---------------------------------------------------------------- functionals

def _product(gammas: np.ndarray) -> np.ndarray:
    w = np.ones(1)
    for g in gammas:
        w = np.multiply.outer(w, g).reshape(-1)
    return w


def xi(model: ModelSpec, gamma) -> float:
    """Expected weight of a factor whose coordinates are i.i.d. from gamma."""
    g = as_probs(gamma, model.q)
    return float(model.psi_bar @ _product([g] * model.k))


def xi_batch(model: ModelSpec, gammas: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """Vectorized xi over the rows of ``gammas``."""
    gammas = np.asarray(gammas, dtype=np.float64)
    out = np.empty(gammas.shape[0])
    for s in range(0, gammas.shape[0], chunk):
        g = gammas[s:s + chunk]
        w = np.ones((g.shape[0], 1))
        for _ in range(model.k):
            w = (w[:, :, None] * g[:, None, :]).reshape(g.shape[0], -1)
        out[s:s + chunk] = w @ model.psi_bar
    return out


def xi_grad(model: ModelSpec, gamma) -> np.ndarray:
    """Gradient of xi in the ambient coordinates of R^q."""
    g = as_probs(gamma, model.q)
    k = model.k
    tabs = np.repeat(model.psi_bar[None, :], k, axis=0)
    gams = np.repeat(g[None, None, :], k, axis=0).repeat(k, axis=1)
    return kernels.messages_batch(tabs, np.arange(k), gams).sum(axis=0)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _ascend(model: ModelSpec, x: np.ndarray, tol: float = 1e-10, max_iter: int = 20000):
    f = xi(model, x)
    step = 1.0
    stall = 0
    for _ in range(max_iter):
        g = xi_grad(model, x)
        if np.linalg.norm(project_simplex(x + g) - x) < tol:
            break
        while True:
            y = project_simplex(x + step * g)
            fy = xi(model, y)
            if fy >= f + 1e-4 * float(g @ (y - x)):
                break
            step *= 0.5
            if step < 1e-18:
                return x, f
        # near the optimum the gains drop below float resolution
        stall = stall + 1 if fy - f <= 4 * np.finfo(float).eps * abs(f) else 0
        x, f = y, fy
        if stall >= 25:
            break
        step = min(step * 2.0, 1e6)
    return x, f


def _starts(model: ModelSpec, count: int = 32) -> list[np.ndarray]:
    q = model.q
    starts = [model.gamma_star.probs.copy(), np.full(q, 1.0 / q)]
    starts += [np.eye(q)[i] for i in range(q)]
    rng = np.random.Generator(np.random.Philox(key=0x5EED))
    while len(starts) < count:
        starts.append(rng.dirichlet(np.ones(q)))
    return starts[:max(count, q + 2)]


def _solve_xi_sup(model: ModelSpec, tie_tol: float = 1e-12) -> XiSup:
    cands = [_ascend(model, s) for s in _starts(model)]
    best = max(f for _, f in cands)
    gs = model.gamma_star.probs
    xg = xi(model, gs)
    if xg >= best - tie_tol:
        return XiSup(xg, Simplex(gs))
    tied = [x for x, f in cands if f >= best - tie_tol]
    x = min(tied, key=lambda v: tuple(np.round(v, 12)))
    return XiSup(xi(model, x), Simplex(x))


def xi_sup(model: ModelSpec) -> XiSup:
    """Maximum of xi over the simplex and a maximizer (gamma* preferred on ties)."""
    return model._xi_sup


def check_bal(model: ModelSpec, tol: float = 1e-9) -> bool:
    """True iff gamma* maximizes xi up to ``tol``."""
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    return xi(model, model.gamma_star) >= xi_sup(model).value - tol


def _table(psi) -> np.ndarray:
    return psi.table if isinstance(psi, WeightFunction) else np.asarray(psi, dtype=np.float64).reshape(-1)


def _gamma_rows(gammas, k: int, q: int | None) -> np.ndarray:
    rows = [as_probs(g) for g in gammas]
    if len(rows) != k:
        raise InvalidArgument(f"expected {k} simplex points, got {len(rows)}")
    qs = {r.shape[0] for r in rows}
    if len(qs) != 1 or (q is not None and qs != {q}):
        raise InvalidArgument("simplex points have inconsistent dimension")
    return np.stack(rows)


def _qk(table: np.ndarray, gam: np.ndarray) -> None:
    if table.shape[0] != gam.shape[1] ** gam.shape[0]:
        raise InvalidArgument("table size does not match q**k")


def zf(psi, gammas) -> float:
    """Expected weight of ``psi`` when coordinate h is drawn from ``gammas[h]``."""
    t = _table(psi)
    k = psi.k if isinstance(psi, WeightFunction) else len(gammas)
    gam = _gamma_rows(gammas, k, psi.q if isinstance(psi, WeightFunction) else None)
    _qk(t, gam)
    return _zf_rows(t, gam)


def _zf_rows(table: np.ndarray, gam: np.ndarray) -> float:
    return float(table @ _product(gam))


def zfm(psi, h: int, gamma_pair) -> float:
    """Like zf, but coordinate ``h`` uses ``gamma_pair[0][h]`` and the rest ``gamma_pair[1]``."""
    if len(gamma_pair) != 2:
        raise InvalidArgument("gamma_pair must hold two rows of k simplex points")
    k = len(gamma_pair[0])
    if not (0 <= int(h) < k):
        raise InvalidArgument(f"h must lie in [0, {k})")
    g1 = _gamma_rows(gamma_pair[0], k, None)
    g2 = _gamma_rows(gamma_pair[1], k, g1.shape[1])
    mixed = g2.copy()
    mixed[int(h)] = g1[int(h)]
    t = _table(psi)
    _qk(t, mixed)
    return _zf_rows(t, mixed)


def log_zv(model: ModelSpec, psis, hs, gammas) -> float:
    """log Z_V for one variable with incident factors (psis[a], hs[a], gammas[a])."""
    dp = len(psis)
    if len(hs) != dp or len(gammas) != dp:
        raise InvalidArgument("psis, hs and gammas must have the same length")
    log_gs = np.log(model.gamma_star.probs)
    if dp == 0:
        return float(logsumexp(log_gs))
    tabs = np.stack([_table(p) for p in psis])
    hs = np.asarray(hs, dtype=np.int64)
    if np.any(hs < 0) or np.any(hs >= model.k):
        raise InvalidArgument("h out of range")
    gams = np.stack([_gamma_rows(g, model.k, model.q) for g in gammas])
    msgs = kernels.messages_batch(tabs, hs, gams)
    return float(logsumexp(log_gs + np.log(msgs).sum(axis=0)))


def zv(model: ModelSpec, d_prime: int, psis, hs, gammas) -> float:
    """Variable-side partition function Z_V."""
    if d_prime != len(psis):
        raise InvalidArgument("d_prime does not match the number of factors")
    return float(np.exp(log_zv(model, psis, hs, gammas)))


def phi_annealed(model: ModelSpec, d: float) -> float:
    """Annealed free entropy (d/k) ln Xi_sup."""
    d = float(d)
    if not (0.0 <= d <= model.d_max):
        raise InvalidArgument(f"d must lie in [0, d_max={model.d_max}]")
    return d / model.k * float(np.log(xi_sup(model).value))


# ---------------------------------------------------------------- serialization

def model_to_dict(model: ModelSpec) -> dict:
    return {
        "q": model.q,
        "k": model.k,
        "psi_min": model.psi_min,
        "gamma_star": [float(x) for x in model.gamma_star.probs],
        "d_max": model.d_max,
        "atoms": [{"prob": float(p), "table": [float(x) for x in a.table]}
                  for p, a in zip(model.atom_probs, model.weights.atoms)],
    }


def model_from_dict(data: dict) -> ModelSpec:
    try:
        q, k = int(data["q"]), int(data["k"])
        atoms = data["atoms"]
        tables = [a["table"] for a in atoms]
        probs = [a["prob"] for a in atoms]
        return make_model(q, k, tables, probs, data["gamma_star"], data["d_max"], data["psi_min"])
    except (KeyError, TypeError) as exc:
        raise InvalidArgument(f"malformed model JSON: {exc}") from exc


def canonical_json(model: ModelSpec) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def model_hash(model: ModelSpec) -> str:
    return hashlib.sha256(canonical_json(model).encode()).hexdigest()


def save_model(model: ModelSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)


def load_model(path) -> ModelSpec:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgument(f"invalid JSON: {exc}") from exc
    return model_from_dict(data)
