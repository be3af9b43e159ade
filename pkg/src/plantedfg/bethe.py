"""Monte Carlo evaluation of the Bethe functional and the positivity
functional, population dynamics, and the projection onto mean-gamma* laws.

Every estimator splits its samples into fixed blocks with their own random
substreams, so results are identical for any number of worker threads.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import kernels
from .errors import InvalidArgument
from .model import ModelSpec, as_probs, xi_sup, xlnx
from .rng import RngStream, as_stream, concat, run_blocks

DEFAULT_BLOCK = 4096
MEAN_TOL = 1e-10


# ---------------------------------------------------------------- populations

@dataclass(frozen=True, eq=False)
class Population:
    """Finitely supported law on the simplex: members with weights."""

    members: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.members, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 2:
            raise InvalidArgument("a population needs at least 2 members, shape (N, q)")
        if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1)) > 1e-9:
            raise InvalidArgument("every member must be a probability vector")
        m = m / m.sum(axis=1, keepdims=True)
        m.setflags(write=False)
        object.__setattr__(self, "members", m)
        if self.weights is not None:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != m.shape[0] or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
                raise InvalidArgument("weights must be a probability vector over members")
            w = w / w.sum()
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def N(self) -> int:
        return self.members.shape[0]

    @property
    def q(self) -> int:
        return self.members.shape[1]

    def mean(self) -> np.ndarray:
        if self.weights is None:
            return self.members.mean(axis=0)
        return self.weights @ self.members

    def sample_indices(self, g: np.random.Generator, shape) -> np.ndarray:
        if self.weights is None:
            return g.integers(0, self.N, size=shape)
        cdf = np.cumsum(self.weights)
        idx = np.searchsorted(cdf, g.random(shape) * cdf[-1], side="right")
        return np.minimum(idx, self.N - 1)

    @classmethod
    def point_mass(cls, gamma, N: int = 2) -> "Population":
        g = as_probs(gamma)
        return cls(np.repeat(g[None, :], max(N, 2), axis=0))

    def to_dict(self) -> dict:
        out = {"members": self.members.tolist()}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Population":
        return cls(np.asarray(data["members"], dtype=np.float64), data.get("weights"))


@dataclass(frozen=True)
class BetheEstimate:
    value: float
    std_error: float
    samples: int
    d: float
    candidates: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class MeanProjectionReport:
    alpha: float
    counterweight: np.ndarray
    mean_before: np.ndarray
    mean_after: np.ndarray


def _warn_mean(pi: Population, gamma_star: np.ndarray, what: str) -> None:
    if np.max(np.abs(pi.mean() - gamma_star)) > 1e-8:
        warnings.warn(f"{what}: population mean differs from gamma*; project_to_mean first",
                      RuntimeWarning, stacklevel=3)


def _summarize(x: np.ndarray, d: float) -> BetheEstimate:
    s = x.shape[0]
    se = float(np.std(x, ddof=1) / np.sqrt(s)) if s > 1 else float("inf")
    return BetheEstimate(float(np.mean(x)), se, s, float(d))


# ---------------------------------------------------------------- Bethe functional

def _variable_side(model: ModelSpec, d: float, pi: Population, count: int, g: np.random.Generator):
    """Sample d_hat ~ Po(d) incident factors per variable; return d_hat and log-unnormalized marginals."""
    k, q = model.k, model.q
    dhat = g.poisson(d, count) if d > 0 else np.zeros(count, dtype=np.int64)
    F = int(dhat.sum())
    log_marg = np.broadcast_to(np.log(model.gamma_star.probs), (count, q)).copy()
    if F:
        atoms = g.choice(model.n_atoms, size=F, p=model.atom_probs) if model.n_atoms > 1 \
            else np.zeros(F, dtype=np.int64)
        hs = g.integers(0, k, size=F)
        idx = pi.sample_indices(g, (F, k))
        msgs = kernels.messages_batch(model.tables[atoms], hs, pi.members[idx])
        lm = np.log(msgs)
        seg = np.repeat(np.arange(count), dhat)
        for c in range(q):
            log_marg[:, c] += np.bincount(seg, weights=lm[:, c], minlength=count)
    return dhat, log_marg


def _log_zv(dhat: np.ndarray, log_marg: np.ndarray) -> np.ndarray:
    lz = logsumexp(log_marg, axis=1)
    lz[dhat == 0] = 0.0  # empty product: Z_V = 1 exactly
    return lz


def _bethe_block(model: ModelSpec, d: float, pi: Population, count: int, stream: RngStream,
                 control_variate: bool) -> np.ndarray:
    g = stream.gen
    k = model.k
    xs = xi_sup(model).value
    ln_xs = np.log(xs)
    dhat, log_marg = _variable_side(model, d, pi, count, g)
    lz = _log_zv(dhat, log_marg)
    t1 = np.exp(lz - dhat * ln_xs) * lz
    if control_variate:
        t1 = t1 - (dhat - d) * ln_xs
    atoms = g.choice(model.n_atoms, size=count, p=model.atom_probs) if model.n_atoms > 1 \
        else np.zeros(count, dtype=np.int64)
    idx = pi.sample_indices(g, (count, k))
    z = kernels.zf_batch(model.tables[atoms], pi.members[idx])
    return t1 - (d * (k - 1) / (k * xs)) * xlnx(z)


def eval_bethe(model: ModelSpec, d: float, pi: Population, samples: int, rng, workers: int = 1,
               block: int = DEFAULT_BLOCK, control_variate: bool = True) -> BetheEstimate:
    """Monte Carlo estimate of the Bethe functional at the law ``pi``.

    The variable term carries the zero-mean control variate
    ``-(d_hat - d) ln Xi_sup``, which leaves the estimator unbiased.
    """
    if samples < 100:
        raise InvalidArgument("eval_bethe needs at least 100 samples")
    if d < 0:
        raise InvalidArgument("d must be nonnegative")
    if pi.q != model.q:
        raise InvalidArgument("population dimension does not match the model")
    _warn_mean(pi, model.gamma_star.probs, "eval_bethe")
    parts = run_blocks(lambda i, c, s: _bethe_block(model, d, pi, c, s, control_variate),
                       samples, block, as_stream(rng), workers)
    return _summarize(concat(parts), d)


def reweighting_mean(model: ModelSpec, d: float, pi: Population, samples: int, rng,
                     workers: int = 1, block: int = DEFAULT_BLOCK) -> tuple[float, float]:
    """Mean and standard error of Z_V / Xi_sup^d_hat over proposal draws."""
    ln_xs = np.log(xi_sup(model).value)

    def one(i, count, stream):
        dhat, log_marg = _variable_side(model, d, pi, count, stream.gen)
        return np.exp(_log_zv(dhat, log_marg) - dhat * ln_xs)

    x = concat(run_blocks(one, samples, block, as_stream(rng), workers))
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.shape[0]))


def _nabla_block(model: ModelSpec, pi1: Population, pi2: Population, count: int, stream: RngStream):
    g = stream.gen
    k = model.k
    atoms = g.choice(model.n_atoms, size=count, p=model.atom_probs) if model.n_atoms > 1 \
        else np.zeros(count, dtype=np.int64)
    hs = g.integers(0, k, size=count)
    g1 = pi1.members[pi1.sample_indices(g, (count, k))]
    g2 = pi2.members[pi2.sample_indices(g, (count, k))]
    gm = g2.copy()
    rows = np.arange(count)
    gm[rows, hs] = g1[rows, hs]
    tabs = model.tables[atoms]
    x1 = xlnx(kernels.zf_batch(tabs, g1))
    x2 = xlnx(kernels.zf_batch(tabs, g2))
    xm = xlnx(kernels.zf_batch(tabs, gm))
    return (x1 - xm) + (k - 1) * (x2 - xm)


def eval_nabla_i(model: ModelSpec, pi1: Population, pi2: Population, samples: int, rng,
                 workers: int = 1, block: int = DEFAULT_BLOCK) -> tuple[float, float]:
    """Estimate of the positivity functional with common random numbers across its three terms."""
    if samples < 2:
        raise InvalidArgument("need at least 2 samples")
    for pi in (pi1, pi2):
        if pi.q != model.q:
            raise InvalidArgument("population dimension does not match the model")
        _warn_mean(pi, model.gamma_star.probs, "eval_nabla_i")
    x = concat(run_blocks(lambda i, c, s: _nabla_block(model, pi1, pi2, c, s),
                          samples, block, as_stream(rng), workers))
    est = _summarize(x, 0.0)
    return est.value, est.std_error


# ---------------------------------------------------------------- projection

def ell_c(ell: float) -> float:
    """Counterweight distance -(1 + ell ln ell) / ln ell for ell in (0, 1)."""
    return -(1.0 + ell * np.log(ell)) / np.log(ell)


def ell_circ(psi_min: float) -> float:
    """Solution of ell_c(ell) = psi_min (0 when psi_min is below ell_c's range)."""
    if psi_min <= ell_c(1e-300):
        return 0.0
    # solve in t = ln ell, where ell_c = -1/t - e^t is smooth and monotone
    t = brentq(lambda t: -1.0 / t - np.exp(t) - psi_min, np.log(1e-300), -1e-16,
               xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(t))


def counterweight(gamma_bar, gamma_star, psi_min: float) -> tuple[float, np.ndarray]:
    """Return (alpha, [gamma_bar]_c) with alpha [gamma_bar]_c + (1 - alpha) gamma_bar = gamma*.

    The counterweight radius is psi_min, capped at the distance from gamma*
    to the simplex boundary in the direction of gamma* - gamma_bar.
    """
    gb = np.asarray(gamma_bar, dtype=np.float64)
    gs = np.asarray(gamma_star, dtype=np.float64)
    diff = gs - gb
    diff -= diff.mean()  # keep the displacement tangent to the simplex despite rounding
    ell = float(np.linalg.norm(diff))
    if ell <= 1e-15:
        return 0.0, gs.copy()
    # radius along diff / ell that stays inside the simplex
    neg = diff < 0
    rho = float(min(psi_min, np.min(gs[neg] * ell / -diff[neg]))) if np.any(neg) else psi_min
    if ell <= ell_circ(rho):
        alpha = -ell * np.log(ell)
        cw = gs + ell_c(ell) / ell * diff
    else:
        alpha = ell / (ell + rho)
        cw = gs + rho / ell * diff
    assert np.all(cw >= -1e-12), "counterweight left the simplex"
    return float(alpha), np.maximum(cw, 0.0)


def project_to_mean(pi: Population, gamma_star, psi_min: float) -> tuple[Population, MeanProjectionReport]:
    """Mix ``pi`` with a point mass at the counterweight so the mean becomes gamma*."""
    gs = as_probs(gamma_star, pi.q)
    before = pi.mean()
    alpha, cw = counterweight(before, gs, psi_min)
    if alpha == 0.0:
        return pi, MeanProjectionReport(0.0, gs, before, before)
    w = pi.weights if pi.weights is not None else np.full(pi.N, 1.0 / pi.N)
    members = np.vstack([pi.members, cw[None, :]])
    weights = np.concatenate([(1 - alpha) * w, [alpha]])
    out = Population(members, weights)
    return out, MeanProjectionReport(alpha, out.members[-1].copy(), before, out.mean())


# ---------------------------------------------------------------- population dynamics

@dataclass(frozen=True)
class BetheConfig:
    N: int = 10_000
    sweeps: int = 200
    damping: float = 0.0
    seed: int = 0
    trace_samples: int = 2_000
    eval_samples: int = 100_000
    workers: int = 1
    block: int = DEFAULT_BLOCK


def _proposals(model: ModelSpec, d: float, pi: Population, count: int, stream: RngStream):
    dhat, log_marg = _variable_side(model, d, pi, count, stream.gen)
    lz = _log_zv(dhat, log_marg)
    ln_xs = np.log(xi_sup(model).value)
    mu = np.exp(log_marg - logsumexp(log_marg, axis=1, keepdims=True))
    return mu / mu.sum(axis=1, keepdims=True), lz - dhat * ln_xs


def systematic_resample(log_w: np.ndarray, u: float) -> np.ndarray:
    """Indices drawn by systematic resampling with offset u in [0, 1)."""
    w = np.exp(log_w - log_w.max())
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    n = log_w.shape[0]
    pos = (u + np.arange(n)) / n
    return np.minimum(np.searchsorted(cdf, pos, side="right"), n - 1)


def _evaluation_population(model: ModelSpec, pi: Population) -> Population:
    return project_to_mean(pi, model.gamma_star.probs, model.psi_min)[0]


def population_dynamics(model: ModelSpec, d: float, config: BetheConfig = BetheConfig(),
                        init: Population | None = None) -> tuple[Population, list[BetheEstimate]]:
    """Reweighted cavity iteration.

    Each sweep proposes N new marginals, each from d_hat ~ Po(d) incident
    messages, and resamples them with weights Z_V / Xi_sup^d_hat.  The trace
    holds eval_bethe of the mean-projected population after each sweep.
    """
    if not (0 <= d <= model.d_max):
        raise InvalidArgument(f"d must lie in [0, d_max={model.d_max}]")
    if not (0.0 <= config.damping < 1.0):
        raise InvalidArgument("damping must lie in [0, 1)")
    root = RngStream(config.seed, 0x9A7E)
    pop = init if init is not None else Population.point_mass(model.gamma_star.probs, config.N)
    if pop.N != config.N or pop.weights is not None:
        pop = Population(pop.members[pop.sample_indices(root.spawn(10 ** 9).gen, config.N)])
    trace = []
    for sweep in range(config.sweeps):
        st = root.spawn(sweep)
        parts = run_blocks(lambda i, c, s: _proposals(model, d, pop, c, s),
                           config.N, config.block, st.spawn(0), config.workers)
        mu = np.vstack([p[0] for p in parts])
        log_w = np.concatenate([p[1] for p in parts])
        assert np.all(np.isfinite(log_w)) and np.all(np.isfinite(mu)), "non-finite message"
        g = st.spawn(1).gen
        new = mu[systematic_resample(log_w, g.random())]
        if config.damping > 0:
            keep = g.random(config.N) < config.damping
            new[keep] = pop.members[keep]
        pop = Population(new)
        est = eval_bethe(model, d, _evaluation_population(model, pop), max(config.trace_samples, 100),
                         st.spawn(2), config.workers, config.block)
        trace.append(est)
    return pop, trace


def _initial_populations(model: ModelSpec, restarts: int, N: int, seed: int) -> list[tuple[str, Population]]:
    gs = model.gamma_star.probs
    q = model.q
    out = [("point_mass", Population.point_mass(gs, N))]
    for r in range(1, restarts):
        g = RngStream(seed, 0xB5 + r).gen
        if r % 2 == 1:
            # vertex-biased: mostly a vertex drawn from gamma*, mixed with gamma*
            t = 0.05 + 0.5 * g.random()
            cols = g.choice(q, size=N, p=gs)
            members = (1 - t) * np.eye(q)[cols] + t * gs[None, :]
            out.append((f"vertex_biased_{r}", Population(members)))
        else:
            conc = 0.5 + 2.0 * g.random()
            members = g.dirichlet(conc * q * gs, size=N)
            out.append((f"dirichlet_{r}", Population(members)))
    return out


def estimate_b_sup(model: ModelSpec, d: float, restarts: int = 3,
                   config: BetheConfig = BetheConfig()) -> BetheEstimate:
    """Best Bethe value over population dynamics runs from several initial laws.

    This is a lower-bound estimator of the supremum: every candidate is a
    mean-gamma* law, but nothing certifies that the supremum was reached.
    The replica-symmetric candidate (point mass at gamma*) is always included.
    All candidates are evaluated with common random numbers.
    """
    if restarts < 1:
        raise InvalidArgument("restarts must be >= 1")
    eval_stream = RngStream(config.seed, 0xE7A1)
    gs = model.gamma_star.probs
    cands = [("replica_symmetric", Population.point_mass(gs))]
    if d > 0:
        for r, (label, init) in enumerate(_initial_populations(model, restarts, config.N, config.seed)):
            cfg = replace(config, seed=int(config.seed) * 1009 + r + 1)
            pop, _ = population_dynamics(model, d, cfg, init)
            cands.append((label, _evaluation_population(model, pop)))
    results = []
    for label, pop in cands:
        est = eval_bethe(model, d, pop, config.eval_samples, eval_stream, config.workers, config.block)
        results.append((label, est))
    label, best = max(results, key=lambda r: r[1].value)
    summary = tuple((lab, e.value, e.std_error) for lab, e in results)
    return replace(best, candidates=summary)


def bethe_lipschitz_constant(model: ModelSpec, d: float) -> float:
    """L with |B(pi) - B(pi')| <= L delta / N when one of N equally weighted
    members moves by total variation delta (exact expectations)."""
    k = model.k
    pmax = model.psi_max
    lnp = np.log(pmax)
    a = pmax ** 2
    var = np.exp(d * (a - 1)) * (d * a + lnp * (d * a + (d * a) ** 2))
    fac = d * (1 + lnp)
    return float(2 * pmax ** 2 * (k - 1) * (var + fac)) if k > 1 else float(2 * pmax ** 2 * var)
