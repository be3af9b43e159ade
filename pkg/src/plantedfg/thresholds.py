"""Limiting quantities built on the annealed free entropy and the Bethe
supremum estimate, and a one-sided search for the condensation threshold.

All Bethe-based values inherit the lower-bound semantics of
``estimate_b_sup``: a detected gap is evidence of condensation, an
undetected one is not evidence of its absence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bethe import BetheConfig, estimate_b_sup
from .errors import InvalidArgument
from .model import ModelSpec, phi_annealed, xi_sup, xlnx
from .rng import map_ordered

NOT_DETECTED = "not detected below d_max"


@dataclass(frozen=True)
class ThresholdConfig:
    bethe: BetheConfig = BetheConfig()
    restarts: int = 3
    grid_points: int = 11
    tol: float = 0.05
    sigmas: float = 3.0
    slack: float = 1e-9   # absolute allowance for rounding in zero-variance cases


@dataclass(frozen=True)
class GridPoint:
    d: float
    phi_a: float
    b_sup: float
    b_sup_se: float
    delta_star: float
    mi_limit: float


@dataclass(frozen=True)
class ThresholdReport:
    d_grid: list
    delta_star: list
    d_cond_bracket: object
    lipschitz_constant: float
    points: list = field(default_factory=list, compare=False)

    @property
    def detected(self) -> bool:
        return self.d_cond_bracket != NOT_DETECTED


def _check_d(model: ModelSpec, d: float) -> None:
    if not (0.0 <= d <= model.d_max):
        raise InvalidArgument(f"d must lie in [0, d_max={model.d_max}]")


def _b_sup(model: ModelSpec, d: float, config: ThresholdConfig):
    _check_d(model, d)
    return estimate_b_sup(model, d, config.restarts, config.bethe)


def delta_star(model: ModelSpec, d: float, config: ThresholdConfig = ThresholdConfig()) -> tuple[float, float]:
    """Lower-bound estimate of B_sup(d) - phi_a(d) and its standard error.

    phi_a is exact, so the error is that of the Bethe estimate alone.
    """
    est = _b_sup(model, d, config)
    return est.value - phi_annealed(model, d), est.std_error


def relative_entropy_limit(model: ModelSpec, d: float, config: ThresholdConfig = ThresholdConfig()) -> tuple[float, float]:
    """Limit of the per-variable planted/null relative entropy; same value as delta_star."""
    return delta_star(model, d, config)


def planted_entropy_term(model: ModelSpec, d: float) -> float:
    """(d / (k Xi_sup)) E[xlnx(psi(sigma))] with sigma ~ gamma*^k, computed exactly."""
    weights = np.prod(model.gamma_star.probs[model.digits], axis=1)
    e = float(model.atom_probs @ (xlnx(model.tables) @ weights))
    return d * e / (model.k * xi_sup(model).value)


def mutual_information_limit(model: ModelSpec, d: float, config: ThresholdConfig = ThresholdConfig()) -> tuple[float, float]:
    """Per-variable mutual information limit: exact first term minus B_sup estimate."""
    est = _b_sup(model, d, config)
    return planted_entropy_term(model, d) - est.value, est.std_error


def curve_lipschitz_constant(model: ModelSpec) -> float:
    """Slope bound used for the emitted curves in d: (2k-1)/k * ln(psi_max/psi_min)."""
    k = model.k
    return (2 * k - 1) / k * float(np.log(model.psi_max / model.psi_min))


def _evaluate(model: ModelSpec, d: float, config: ThresholdConfig) -> GridPoint:
    est = _b_sup(model, d, config)
    pa = phi_annealed(model, d)
    return GridPoint(float(d), pa, est.value, est.std_error, est.value - pa,
                     planted_entropy_term(model, d) - est.value)


def _detected(p: GridPoint, config: ThresholdConfig) -> bool:
    return p.delta_star > config.sigmas * p.b_sup_se + config.slack


def locate_d_cond(model: ModelSpec, config: ThresholdConfig = ThresholdConfig(),
                  grid: Sequence[float] | None = None, workers: int = 1) -> ThresholdReport:
    """Scan a grid on [0, d_max] for delta_star > 3 sigma, then bisect the first bracket.

    Bisection relies only on the regimes being intervals.  The bracket is
    reported as (lo, hi) with lo undetected and hi detected.
    """
    if grid is None:
        if config.grid_points < 2:
            raise InvalidArgument("grid_points must be >= 2")
        grid = np.linspace(0.0, model.d_max, config.grid_points)
    grid = sorted({float(x) for x in grid} | {0.0})
    for d in grid:
        _check_d(model, d)
    points = map_ordered(lambda i: _evaluate(model, grid[i], config), len(grid), workers)
    first = next((i for i, p in enumerate(points) if _detected(p, config)), None)
    if first is None:
        bracket = NOT_DETECTED
    elif first == 0:
        bracket = (points[0].d, points[0].d)
    else:
        lo, hi = points[first - 1].d, points[first].d
        while hi - lo > config.tol:
            mid = 0.5 * (lo + hi)
            p = _evaluate(model, mid, config)
            points.append(p)
            if _detected(p, config):
                hi = mid
            else:
                lo = mid
        bracket = (lo, hi)
    points.sort(key=lambda p: p.d)
    return ThresholdReport([p.d for p in points], [(p.delta_star, p.b_sup_se) for p in points],
                           bracket, curve_lipschitz_constant(model), points)


@dataclass(frozen=True)
class GapBound:
    sup_bound: float          # c * sup_{d' <= d} delta*(d')^2
    quadratic_bound: float    # lower root of the quadratic inequality at d' = d
    quadratic_upper: float    # upper root
    c: float


def default_gap_constant(delta_values: Sequence[float], eps: float = 1e-12) -> float:
    return 1.0 / (4.0 * max(max(delta_values, default=0.0), 0.0) + eps)


def condensation_gap_bound(model: ModelSpec | None, d: float, delta_star_curve, c: float | None = None) -> GapBound:
    """Lower bound on phi_a(d) - (upper quenched free entropy) from a delta_star curve.

    ``delta_star_curve`` is a sequence of (d', delta*(d')) pairs.  Negative
    estimates are treated as 0.  With u the gap and D = delta*(d), the
    inequality u >= c (D + u)^2 gives
    u >= D~ - sqrt(D~^2 - D^2) with D~ = 1/(2c) - D, real whenever c D <= 1/4.
    """
    pts = [(float(x), max(float(v), 0.0)) for x, v in delta_star_curve if float(x) <= d + 1e-12]
    if not pts:
        raise InvalidArgument("delta_star_curve has no point at or below d")
    at_d = min(pts, key=lambda p: abs(p[0] - d))
    if abs(at_d[0] - d) > 1e-12:
        raise InvalidArgument("delta_star_curve must contain the point d itself")
    sup_delta = max(v for _, v in pts)
    if c is None:
        c = default_gap_constant([sup_delta])
    if c <= 0:
        raise InvalidArgument("c must be positive")
    D = at_d[1]
    if c * D > 0.25:
        raise InvalidArgument(f"c * delta_star(d) = {c * D:.4g} exceeds 1/4; the quadratic form is undefined")
    dt = 1.0 / (2.0 * c) - D
    disc = np.sqrt(max(dt * dt - D * D, 0.0))
    # D^2 / (dt + disc) equals dt - disc without cancellation
    lower = D * D / (dt + disc) if dt + disc > 0 else 0.0
    return GapBound(c * sup_delta ** 2, float(lower), float(dt + disc), float(c))


def printed_quadratic_form(delta: float, c: float) -> float:
    """D~ - sqrt(D~^2 - D) with D~ = 1/(2c) - D, the form without the square on D.

    Kept for comparison only; it is not a valid consequence of the
    inequality (see condensation_gap_bound)."""
    dt = 1.0 / (2.0 * c) - delta
    return float(dt - np.sqrt(dt * dt - delta))
