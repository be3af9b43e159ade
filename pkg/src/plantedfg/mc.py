"""Finite-size Monte Carlo estimates of quenched free entropies, computed
with exact partition functions of sampled graphs."""
from __future__ import annotations

from dataclasses import dataclass, field
from threading import Lock

import numpy as np

from .errors import InvalidArgument
from .exact import free_entropy
from .graphs import (NishimoriWeights, nishimori_weights, sample_iid, sample_nishimori,
                     sample_null, sample_teacher_student)
from .model import ModelSpec
from .rng import as_stream, run_blocks

VARIANTS = ("null", "planted_iid", "planted_nishimori")
MC_BLOCK = 256


class _NishimoriCache:
    """Class weights of the Nishimori ground truth, one table per m."""

    def __init__(self, model: ModelSpec, n: int):
        self.model, self.n = model, n
        self._tables: dict[int, NishimoriWeights] = {}
        self._lock = Lock()

    def __call__(self, m: int) -> NishimoriWeights:
        with self._lock:
            w = self._tables.get(m)
            if w is None:
                w = self._tables[m] = nishimori_weights(self.model, self.n, m)
            return w


def _check(model: ModelSpec, n: int, d: float, samples: int) -> None:
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if not (0.0 <= d <= model.d_max):
        raise InvalidArgument(f"d must lie in [0, d_max={model.d_max}]")
    if samples < 2:
        raise InvalidArgument("need at least 2 samples")


def _draw(model: ModelSpec, n: int, m: int, which: str, g: np.random.Generator, cache: _NishimoriCache) -> float:
    if which == "null":
        graph = sample_null(model, n, m, g)
    elif which == "planted_iid":
        graph = sample_teacher_student(model, sample_iid(model, n, g), m, g)
    elif which == "planted_nishimori":
        sigma = sample_nishimori(model, n, m, g, cache(m))
        graph = sample_teacher_student(model, sigma, m, g)
    else:
        raise InvalidArgument(f"unknown variant {which!r}; expected one of {VARIANTS}")
    return free_entropy(model, graph)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    # for a sample mean the jackknife standard error is std(ddof=1)/sqrt(N)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.shape[0]))


def sample_free_entropies(model: ModelSpec, n: int, d: float, which: str, samples: int, rng,
                          workers: int = 1, block: int = MC_BLOCK) -> tuple[np.ndarray, np.ndarray]:
    """Return (m values, free entropies) for ``samples`` graphs with m ~ Po(d n / k)."""
    _check(model, n, d, samples)
    if which not in VARIANTS:
        raise InvalidArgument(f"unknown variant {which!r}; expected one of {VARIANTS}")
    cache = _NishimoriCache(model, n)

    def one(i, count, stream):
        g = stream.gen
        ms = g.poisson(d * n / model.k, count)
        return ms, np.array([_draw(model, n, int(m), which, g, cache) for m in ms])

    parts = run_blocks(one, samples, block, as_stream(rng), workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def quenched_free_entropy(model: ModelSpec, n: int, d: float, which: str, samples: int, rng,
                          workers: int = 1) -> tuple[float, float]:
    """Mean free entropy (1/n) ln Z over sampled graphs and its standard error."""
    _, phis = sample_free_entropies(model, n, d, which, samples, rng, workers)
    return _mean_se(phis)


# ---------------------------------------------------------------- ordering

@dataclass(frozen=True)
class OrderingRow:
    m: int
    count: int
    planted: float
    planted_se: float
    annealed: float
    null: float
    null_se: float
    ok: bool


@dataclass(frozen=True)
class OrderingReport:
    rows: list
    planted_gap: float      # mean of phi(planted) - phi_a(m), paired by sample
    planted_gap_se: float
    null_gap: float         # mean of phi_a(m) - phi(null)
    null_gap_se: float
    passed: bool
    strict: bool            # both gaps exceed 3 sigma
    sigmas: float = field(default=3.0)


def annealed_at_m(model: ModelSpec, n: int, m: int) -> float:
    """(1/n) ln E[Z] for m factors, exact."""
    if m == 0:
        return 0.0
    return nishimori_weights(model, n, m).log_norm / n


def ordering_check(model: ModelSpec, n: int, d: float, samples: int, rng, workers: int = 1,
                   sigmas: float = 3.0, slack: float = 1e-12, min_group: int = 30) -> OrderingReport:
    """Check E phi(planted Nishimori) >= (1/n) ln E Z >= E phi(null), per sampled m and overall.

    The planted and null samples come from separate substreams; m is drawn
    independently for each.  Per-m rows need ``min_group`` samples on each
    side, since the standard error of a handful of draws is unreliable; the
    overall paired gaps use every sample.
    """
    stream = as_stream(rng)
    mp, fp = sample_free_entropies(model, n, d, "planted_nishimori", samples, stream.spawn(0), workers)
    mn, fn = sample_free_entropies(model, n, d, "null", samples, stream.spawn(1), workers)
    ann = {int(m): annealed_at_m(model, n, int(m)) for m in np.union1d(mp, mn)}
    rows, ok_all = [], True
    for m in sorted(ann):
        p = fp[mp == m]
        q = fn[mn == m]
        if p.size < max(min_group, 2) or q.size < max(min_group, 2):
            continue
        pm, ps = _mean_se(p)
        nm, ns = _mean_se(q)
        ok = (pm >= ann[m] - sigmas * ps - slack) and (ann[m] >= nm - sigmas * ns - slack)
        ok_all &= ok
        rows.append(OrderingRow(m, int(p.size + q.size), pm, ps, ann[m], nm, ns, bool(ok)))
    gp, gps = _mean_se(fp - np.array([ann[int(m)] for m in mp]))
    gn, gns = _mean_se(np.array([ann[int(m)] for m in mn]) - fn)
    overall = gp >= -sigmas * gps - slack and gn >= -sigmas * gns - slack
    strict = gp > sigmas * gps and gn > sigmas * gns
    return OrderingReport(rows, gp, gps, gn, gns, bool(ok_all and overall), bool(strict), sigmas)


# ---------------------------------------------------------------- concentration

@dataclass(frozen=True)
class ConcentrationReport:
    r_grid: np.ndarray
    tail: np.ndarray
    tail_counts: np.ndarray
    mean: float
    slope: float | None       # fitted slope of ln tail against r^2
    r_squared: float | None
    fit_points: int

    @property
    def sub_gaussian(self) -> bool | None:
        """True if the fit is good and decreasing, None when there is too little tail data."""
        if self.slope is None:
            return None
        return self.slope < 0 and self.r_squared > 0.9


def concentration_check(model: ModelSpec, n: int, d: float, samples: int, rng, which: str = "null",
                        r_points: int = 25, min_count: int = 100, workers: int = 1) -> ConcentrationReport:
    """Empirical P[|phi - mean| >= r] on an r-grid, with a fit of ln P against r^2.

    Only grid points with at least ``min_count`` tail samples enter the fit.
    """
    _, phis = sample_free_entropies(model, n, d, which, samples, rng, workers)
    mean = float(phis.mean())
    dev = np.abs(phis - mean)
    top = float(dev.max())
    r = np.linspace(0.0, top, r_points) if top > 0 else np.linspace(0.0, 1.0, r_points)
    counts = (dev[None, :] >= r[:, None]).sum(axis=1)
    if top == 0:
        counts[1:] = 0
    tail = counts / phis.shape[0]
    use = (r > 0) & (counts >= min_count)
    slope = r2 = None
    if use.sum() >= 3:
        x, y = r[use] ** 2, np.log(tail[use])
        coef = np.polyfit(x, y, 1)
        fit = np.polyval(coef, x)
        ss = float(np.sum((y - y.mean()) ** 2))
        slope = float(coef[0])
        r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return ConcentrationReport(r, tail, counts, mean, slope, r2, int(use.sum()))
