"""Pinning of explicit measures, the symmetry functionals iota and nu, and
desk-scale checks of the pinning bound.

Tuples v in [n]^ell may repeat indices.  Two conventions are offered:

- ``collapse`` (default): a tuple contributes the divergence of the joint
  law of its distinct variables from the product of their marginals, so a
  tuple with a single distinct variable contributes 0.
- ``literal``: the law of (sigma_v(1), ..., sigma_v(ell)) on [q]^ell is
  compared with the product of the ell marginals; a repeated index then
  contributes the entropy of that variable.

iota is evaluated exactly through the entropies of subsets of size <= ell,
weighted by the number of tuples with a given set of distinct entries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import beta as beta_fn, betainc

from .errors import InvalidArgument, ResourceLimitError
from .exact import PARTITION_GUARD, DenseMeasure, nishimori_joint
from .model import ModelSpec
from .rng import as_stream, run_blocks

CONVENTIONS = ("collapse", "literal")
EXACT_PIN_MAX_N = 12
TUPLE_ENUM_LIMIT = 10 ** 6


@lru_cache(maxsize=None)
def surjections(ell: int, s: int) -> int:
    """Number of tuples in S^ell whose set of entries is exactly S, |S| = s."""
    return sum((-1) ** j * comb(s, j) * (s - j) ** ell for j in range(s + 1))


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    """Entropy of each row of a nonnegative array whose rows sum to 1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p), 0.0)
    return -t.sum(axis=1)


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise InvalidArgument(f"convention must be one of {CONVENTIONS}")


def _check_measure(mu: DenseMeasure) -> None:
    if mu.q ** mu.n > PARTITION_GUARD:
        raise ResourceLimitError(f"q^n = {mu.q ** mu.n} exceeds the guard {PARTITION_GUARD}")


@dataclass(frozen=True)
class PinSpec:
    theta_cap: float
    pinned: tuple           # sorted variable indices U
    sigma_check: tuple      # full assignment; only entries in U are used

    def __post_init__(self):
        n = len(self.sigma_check)
        if not (0 < self.theta_cap <= n):
            raise InvalidArgument("theta_cap must lie in (0, n]")
        if any(not (0 <= i < n) for i in self.pinned):
            raise InvalidArgument("pinned variables must lie in [0, n)")


def sample_pins(mu: DenseMeasure, theta_cap: float, rng) -> PinSpec:
    """theta ~ Unif[0, theta_cap], U with i.i.d. Bernoulli(theta/n) membership, sigma ~ mu."""
    n = mu.n
    if not (0 < theta_cap <= n):
        raise InvalidArgument("theta_cap must lie in (0, n]")
    g = as_stream(rng).gen if not isinstance(rng, np.random.Generator) else rng
    theta = g.uniform(0.0, theta_cap)
    pinned = tuple(int(i) for i in np.flatnonzero(g.random(n) < theta / n))
    flat = g.choice(mu.probs.shape[0], p=mu.probs)
    sigma = tuple(int(x) for x in np.unravel_index(flat, (mu.q,) * n))
    return PinSpec(float(theta_cap), pinned, sigma)


def pin_measure(mu: DenseMeasure, pins, sigma_check=None) -> DenseMeasure:
    """Law of sigma given sigma_U = sigma_check_U.

    ``pins`` is either a PinSpec or the set U (then ``sigma_check`` is needed).
    """
    if isinstance(pins, PinSpec):
        U, sc = pins.pinned, pins.sigma_check
    else:
        U, sc = tuple(sorted(int(i) for i in pins)), sigma_check
    if not U:
        return mu
    if sc is None or len(sc) != mu.n:
        raise InvalidArgument("sigma_check must be a full assignment of length n")
    t = mu.tensor().copy()
    mask = np.ones(t.shape, dtype=bool)
    for i in U:
        sl = [slice(None)] * mu.n
        keep = np.zeros(mu.q, dtype=bool)
        keep[int(sc[i])] = True
        sl[i] = ~keep
        mask[tuple(sl)] = False
    t[~mask] = 0.0
    z = t.sum()
    if z <= 0:
        raise InvalidArgument("the pinning event has probability zero")
    return DenseMeasure(mu.n, mu.q, (t / z).reshape(-1))


# ---------------------------------------------------------------- iota

def _multiplicity(ell: int, f: int, u: int) -> int:
    """Tuples in [n]^ell whose distinct free entries are a fixed f-set, any pinned entries from u."""
    return sum(comb(u, j) * surjections(ell, f + j) for j in range(0, min(u, ell - f) + 1))


def _iota_from_rows(rows: np.ndarray, q: int, n: int, free: list, u: int, ells, convention: str) -> dict:
    """iota_ell for each row of a (R, q^len(free)) array of laws of the free variables."""
    R = rows.shape[0]
    nf = len(free)
    t = rows.reshape((R,) + (q,) * nf)
    lmax = max(ells)
    h1 = np.zeros((R, nf))
    for a in range(nf):
        axes = tuple(1 + b for b in range(nf) if b != a)
        h1[:, a] = _entropy_rows(t.sum(axis=axes) if axes else t)
    # subset entropies for 2 <= |F| <= lmax
    hsub = {}
    for f in range(2, min(lmax, nf) + 1):
        for F in itertools.combinations(range(nf), f):
            axes = tuple(1 + b for b in range(nf) if b not in F)
            marg = t.sum(axis=axes) if axes else t
            hsub[F] = _entropy_rows(marg.reshape(R, -1))
    out = {}
    for ell in ells:
        total = np.zeros(R)
        if convention == "collapse":
            for F, hF in hsub.items():
                if len(F) <= ell:
                    total += _multiplicity(ell, len(F), u) * (h1[:, list(F)].sum(axis=1) - hF)
        else:
            total += ell * n ** (ell - 1) * h1.sum(axis=1)
            total -= _multiplicity(ell, 1, u) * h1.sum(axis=1)
            for F, hF in hsub.items():
                if len(F) <= ell:
                    total -= _multiplicity(ell, len(F), u) * hF
        out[ell] = np.maximum(total / n ** ell, 0.0)
    return out


def iota_ell(mu: DenseMeasure, ell: int, convention: str = "collapse") -> float:
    """Average over v in [n]^ell of KL(law of sigma_v || product of its marginals), exact."""
    _check_convention(convention)
    _check_measure(mu)
    if ell < 0:
        raise InvalidArgument("ell must be >= 0")
    if ell <= 1:
        return 0.0
    res = _iota_from_rows(mu.probs[None, :], mu.q, mu.n, list(range(mu.n)), 0, [ell], convention)
    return float(res[ell][0])


# ---------------------------------------------------------------- nu

def _tuple_laws(mu: DenseMeasure, v, convention: str, cache: dict):
    """(law of sigma_v, product of marginals) as flat vectors under the convention."""
    S = sorted(set(int(i) for i in v))
    if convention == "collapse":
        key = tuple(S)
        if key not in cache:
            joint = mu.marginal(S).reshape(-1)
            prod = DenseMeasure.product([mu.marginal([i]) for i in S]).probs
            cache[key] = (joint, prod)
        return cache[key]
    key = tuple(int(i) for i in v)
    if key not in cache:
        ell = len(key)
        joint_s = mu.marginal(S)
        grid = np.indices((mu.q,) * ell).reshape(ell, -1)          # (ell, q^ell)
        # a point of [q]^ell is consistent when equal indices carry equal colors
        pos = [S.index(i) for i in key]
        first = {p: h for h, p in reversed(list(enumerate(pos)))}
        consistent = np.all([grid[h] == grid[first[p]] for h, p in enumerate(pos)], axis=0)
        xs = tuple(grid[first[p]] for p in range(len(S)))
        joint = np.where(consistent, joint_s[xs], 0.0)
        marg = [mu.marginal([i]) for i in key]
        prod = np.prod([marg[h][grid[h]] for h in range(ell)], axis=0)
        cache[key] = (joint, prod)
    return cache[key]


def tuple_divergences(mu: DenseMeasure, v, convention: str = "collapse") -> tuple[float, float]:
    """(KL, TV) of the law of sigma_v from the product of its marginals."""
    _check_convention(convention)
    joint, prod = _tuple_laws(mu, v, convention, {})
    m = joint > 0
    kl = float(np.sum(joint[m] * (np.log(joint[m]) - np.log(prod[m]))))
    return max(kl, 0.0), float(0.5 * np.abs(joint - prod).sum())


def nu_ell(mu: DenseMeasure, ell: int, convention: str = "collapse", samples: int = 10_000,
           rng=None) -> float:
    """Average over v in [n]^ell of the total variation between sigma_v and its product law.

    Exact when n^ell <= 10^6, otherwise averaged over ``samples`` uniform tuples.
    """
    _check_convention(convention)
    _check_measure(mu)
    if ell <= 1:
        return 0.0
    cache: dict = {}

    def tv(v):
        joint, prod = _tuple_laws(mu, v, convention, cache)
        return 0.5 * np.abs(joint - prod).sum()

    if mu.n ** ell <= TUPLE_ENUM_LIMIT:
        return float(np.mean([tv(v) for v in itertools.product(range(mu.n), repeat=ell)]))
    g = as_stream(rng).gen
    return float(np.mean([tv(v) for v in g.integers(0, mu.n, size=(samples, ell))]))


# ---------------------------------------------------------------- pinning bound

@dataclass(frozen=True)
class PinningCheck:
    ell: int
    theta_cap: float
    lhs: float
    std_error: float
    rhs: float
    exact: bool
    sigmas: float = 3.0

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.sigmas * self.std_error + 1e-12


def pinning_bound(ell: int, q: int, theta_cap: float) -> float:
    """binom(ell, 2) ln(q) / Theta."""
    return float(comb(ell, 2) * np.log(q) / theta_cap)


def pin_set_probabilities(n: int, theta_cap: float) -> np.ndarray:
    """P(U = a fixed set of size j), j = 0..n, with theta ~ Unif[0, Theta] and Bernoulli(theta/n) membership."""
    j = np.arange(n + 1)
    a, b = j + 1.0, n - j + 1.0
    return (n / theta_cap) * betainc(a, b, theta_cap / n) * beta_fn(a, b)


def _pinned_iota_table(mu: DenseMeasure, ells, convention: str):
    """For every pin set U: (row masses, {ell: iota per pin value}) of the pinned measures."""
    n, q = mu.n, mu.q
    t = mu.tensor()
    out = []
    for r in range(n + 1):
        for U in itertools.combinations(range(n), r):
            free = [i for i in range(n) if i not in U]
            rows = np.transpose(t, list(U) + free).reshape(q ** r, q ** (n - r))
            mass = rows.sum(axis=1)
            live = mass > 0
            cond = rows[live] / mass[live, None]
            iot = _iota_from_rows(cond, q, n, free, r, ells, convention) if len(free) >= 2 or convention == "literal" \
                else {ell: np.zeros(cond.shape[0]) for ell in ells}
            out.append((r, mass[live], iot))
    return out


def pinning_lemma_table(mu: DenseMeasure, ells, thetas, convention: str = "collapse") -> list[PinningCheck]:
    """Exact E[iota_ell(pinned mu)] for every (ell, Theta), sharing the conditional entropies."""
    _check_convention(convention)
    n = mu.n
    if n > EXACT_PIN_MAX_N:
        raise InvalidArgument(f"exact enumeration of pin sets needs n <= {EXACT_PIN_MAX_N}")
    for th in thetas:
        if not (0 < th <= n):
            raise InvalidArgument("theta_cap must lie in (0, n]")
    ells = [int(e) for e in ells]
    table = _pinned_iota_table(mu, [e for e in ells if e >= 2] or [2], convention)
    checks = []
    for th in thetas:
        pj = pin_set_probabilities(n, th)
        for ell in ells:
            lhs = 0.0 if ell <= 1 else float(sum(pj[r] * float(mass @ iot[ell]) for r, mass, iot in table))
            checks.append(PinningCheck(ell, float(th), lhs, 0.0, pinning_bound(ell, mu.q, th), True))
    return checks


def verify_pinning_lemma(mu: DenseMeasure, ell: int, theta_cap: float, samples: int = 10_000, rng=None,
                         convention: str = "collapse", exact: bool | None = None,
                         workers: int = 1) -> PinningCheck:
    """Compare E[iota_ell([mu] pinned at (U, sigma))] with binom(ell, 2) ln(q) / Theta.

    Exact over all pin sets and pin values when n <= 12 (unless ``exact`` is
    False); otherwise a Monte Carlo average over ``samples`` pin draws.
    """
    _check_convention(convention)
    _check_measure(mu)
    if not (0 < theta_cap <= mu.n):
        raise InvalidArgument("theta_cap must lie in (0, n]")
    if exact is None:
        exact = mu.n <= EXACT_PIN_MAX_N
    if exact:
        return pinning_lemma_table(mu, [ell], [theta_cap], convention)[0]
    if samples < 2:
        raise InvalidArgument("need at least 2 samples")

    def block(i, count, stream):
        g = stream.gen
        return np.array([iota_ell(pin_measure(mu, sample_pins(mu, theta_cap, g)), ell, convention)
                         for _ in range(count)])

    parts = run_blocks(block, samples, 256, as_stream(rng), workers)
    x = np.concatenate(parts)
    return PinningCheck(ell, float(theta_cap), float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)),
                        pinning_bound(ell, mu.q, theta_cap), False)


# ---------------------------------------------------------------- pinned Nishimori

def verify_pinned_nishimori(model: ModelSpec, n: int, m: int, theta_cap: float) -> float:
    """Exact TV between (sigma_hat, G, U) and (tau, G, U), where tau is drawn from
    the Gibbs measure of G pinned to sigma_hat on U.

    sigma_hat is the Nishimori ground truth, G = G*(sigma_hat) and U is the
    random pin set with cap Theta.  Pin sets are enumerated.
    """
    if not (0 < theta_cap <= n):
        raise InvalidArgument("theta_cap must lie in (0, n]")
    sp, lp = nishimori_joint(model, n, m)
    p = np.exp(lp)                       # (q^n, graphs)
    gibbs = np.exp(sp.log_gibbs)
    q = model.q
    assign = sp.assignments
    pj = pin_set_probabilities(n, theta_cap)
    tv = 0.0
    for r in range(n + 1):
        for U in itertools.combinations(range(n), r):
            key = np.zeros(assign.shape[0], dtype=np.int64)
            for i in U:
                key = key * q + assign[:, i]
            classes = q ** r
            mass = np.zeros((classes, p.shape[1]))
            gmass = np.zeros((classes, p.shape[1]))
            np.add.at(mass, key, p)
            np.add.at(gmass, key, gibbs)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(gmass > 0, mass / gmass, 0.0)
            other = gibbs * ratio[key]
            tv += pj[r] * 0.5 * float(np.abs(p - other).sum())
    return tv
