"""Closed-form guarantee calculators and their horizon thresholds.

Every bound here has the shape  1/(2N) + sqrt(Q/T)  for a rational Q:

  main        Q = N/4            (worst-case Bernoulli variance, all points)
  refined     Q = sum_d f(d)     (per-point variance cap f(d) = d'(1-d'))
  loose       Q = N^2/4          (per-point counts bounded by T)
  grid_prime  Q = (N+1)/4        (endpoint grid with N+1 points)

The threshold of a bound is the least integer horizon at which it certifies
an expected score of at most 1/N; since  bound <= 1/N  iff  T >= 4 N^2 Q,
thresholds are computed by exact rational comparison, never by floating-point
root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .fmt import fmt12
from .scoring import Grid, make_grid


def f_of_d(d, n_points: int) -> Fraction:
    """The per-point variance cap f(d) = d'(1-d'), where d' shifts d by
    1/(2N) toward 1/2 (and stays put at 1/2)."""
    grid = make_grid(n_points)
    j = grid.index_of(d)  # raises off-grid
    d = grid.points[j]
    half = Fraction(1, 2)
    shift = Fraction(1, 2 * n_points)
    if d < half:
        dp = d + shift
    elif d > half:
        dp = d - shift
    else:
        dp = d
    return dp * (1 - dp)


def sum_f(n_points: int) -> tuple[Fraction, Fraction]:
    """(direct sum of f over the grid, closed form N/6 + 1/4 - 1/(6N)).

    The direct summation is the oracle; both are exact and must agree.
    """
    if n_points < 1:
        raise ValueError(f"need at least one grid point, got {n_points}")
    grid = make_grid(n_points)
    direct = sum((f_of_d(d, n_points) for d in grid.points), Fraction(0))
    closed = Fraction(n_points, 6) + Fraction(1, 4) - Fraction(1, 6 * n_points)
    return direct, closed


def _sum_f_scaled_direct(n: int) -> int:
    """4 N^2 sum_d f(d) by vectorized integer summation (exact in int64)."""
    k = np.arange(1, n + 1, dtype=np.int64)
    low = 4 * k * (n - k)              # d < 1/2: d' = k/N
    high = 4 * (k - 1) * (n - k + 1)   # d > 1/2: d' = (k-1)/N
    terms = np.where(2 * k - 1 < n, low, high)
    if n % 2 == 1:
        terms[(n - 1) // 2] = n * n    # d = 1/2: f = 1/4
    return int(terms.sum())


def verify_sum_f_range(n_lo: int, n_hi: int) -> Optional[int]:
    """Check direct == closed for every N in [n_lo, n_hi]; returns the first
    failing N, or None.  Works on the 4N^2-scaled integers."""
    for n in range(n_lo, n_hi + 1):
        closed_scaled = 2 * n**3 + 3 * n * n - 2 * n
        if closed_scaled % 3 != 0:
            return n
        if _sum_f_scaled_direct(n) != closed_scaled // 3:
            return n
    return None


# ---------------------------------------------------------------------------
# Bounds and thresholds

_KINDS = ("main", "refined", "loose", "grid_prime")


def _sqrt_arg(kind: str, n: int) -> Fraction:
    """The rational Q with bound = 1/(2N) + sqrt(Q/T)."""
    if kind == "main":
        return Fraction(n, 4)
    if kind == "refined":
        return sum_f(n)[1]
    if kind == "loose":
        return Fraction(n * n, 4)
    if kind == "grid_prime":
        return Fraction(n + 1, 4)
    raise ValueError(f"unknown bound kind {kind!r}")


def bound_value(kind: str, n: int, horizon: int) -> float:
    return 1 / (2 * n) + math.sqrt(_sqrt_arg(kind, n) / horizon)


def bound_holds(kind: str, n: int, horizon: int) -> bool:
    """Exact test of bound(N, T) <= 1/N:  T >= 4 N^2 Q."""
    return horizon >= 4 * n * n * _sqrt_arg(kind, n)


def threshold(kind: str, n: int) -> int:
    """Least integer T with bound(N, T) <= 1/N, by rational comparison."""
    t = math.ceil(4 * n * n * _sqrt_arg(kind, n))
    t = max(t, 1)
    if not bound_holds(kind, n, t):
        t += 1
    while t > 1 and bound_holds(kind, n, t - 1):
        t -= 1
    return t


def value_within_main_bound(value: Fraction, n: int, horizon: int) -> bool:
    """Exact test of value <= 1/(2N) + (1/2) sqrt(N/T) for a rational value."""
    rest = value - Fraction(1, 2 * n)
    if rest <= 0:
        return True
    return rest * rest <= Fraction(n, 4 * horizon)


@dataclass(frozen=True)
class BoundReport:
    """All four bound values at (N, T) plus their certification thresholds."""

    n_points: int
    horizon: int
    main_bound: float
    refined_bound: float
    loose_bound: float
    grid_prime_bound: float
    main_threshold: int
    refined_threshold: int
    loose_threshold: int
    grid_prime_threshold: int

    def rows(self) -> list[dict]:
        labels = {
            "main": (self.main_bound, self.main_threshold),
            "refined": (self.refined_bound, self.refined_threshold),
            "loose": (self.loose_bound, self.loose_threshold),
            "grid_prime": (self.grid_prime_bound, self.grid_prime_threshold),
        }
        return [
            {
                "N": self.n_points,
                "T": self.horizon,
                "bound": name,
                "value": fmt12(val),
                "threshold": thr,
            }
            for name, (val, thr) in labels.items()
        ]

    def to_json_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "horizon": self.horizon,
            "bounds": {
                name: {"value": val, "threshold": thr}
                for name, val, thr in [
                    ("main", self.main_bound, self.main_threshold),
                    ("refined", self.refined_bound, self.refined_threshold),
                    ("loose", self.loose_bound, self.loose_threshold),
                    ("grid_prime", self.grid_prime_bound, self.grid_prime_threshold),
                ]
            },
        }


def bound_report(n: int, horizon: int) -> BoundReport:
    if n < 1 or horizon < 1:
        raise ValueError("need N >= 1 and T >= 1")
    return BoundReport(
        n_points=n,
        horizon=horizon,
        main_bound=bound_value("main", n, horizon),
        refined_bound=bound_value("refined", n, horizon),
        loose_bound=bound_value("loose", n, horizon),
        grid_prime_bound=bound_value("grid_prime", n, horizon),
        main_threshold=threshold("main", n),
        refined_threshold=threshold("refined", n),
        loose_threshold=threshold("loose", n),
        grid_prime_threshold=threshold("grid_prime", n),
    )


# ---------------------------------------------------------------------------
# Empirical second-moment check


@dataclass(frozen=True)
class PointRatio:
    """Per grid point: empirical E[G~(d)^2], E[n(d)], their ratio, the
    delta-method standard error, and whether the ratio exceeds 1/4 + 3 SE."""

    point: Fraction
    mean_gsq: float
    mean_n: float
    ratio: float
    se: float
    flagged: bool


def ratio_table(gsq: np.ndarray, ns: np.ndarray, grid: Grid) -> list[PointRatio]:
    """Ratio estimates from per-episode arrays of shape (replications, N)."""
    gsq = np.asarray(gsq, dtype=np.float64)
    ns = np.asarray(ns, dtype=np.float64)
    if gsq.shape != ns.shape or gsq.ndim != 2 or gsq.shape[1] != grid.n_points:
        raise ValueError("expected (replications, N) arrays")
    reps = gsq.shape[0]
    out = []
    for j, point in enumerate(grid.points):
        u = gsq[:, j]
        w = ns[:, j]
        mean_u = float(u.mean())
        mean_w = float(w.mean())
        if mean_w == 0:
            out.append(PointRatio(point, mean_u, mean_w, 0.0, 0.0, False))
            continue
        ratio = mean_u / mean_w
        if reps >= 2:
            s_uu = float(np.var(u, ddof=1))
            s_ww = float(np.var(w, ddof=1))
            s_uw = float(np.cov(u, w, ddof=1)[0, 1])
            var = (s_uu - 2 * ratio * s_uw + ratio * ratio * s_ww) / (
                reps * mean_w * mean_w
            )
            se = math.sqrt(max(var, 0.0))
        else:
            se = float("inf")
        flagged = math.isfinite(se) and ratio > 0.25 + 3 * se
        out.append(PointRatio(point, mean_u, mean_w, ratio, se, flagged))
    return out


def variance_bound_check(episodes: Iterable, grid: Grid) -> list[PointRatio]:
    """Ratio table from played episodes; every transcript must carry p_t."""
    gsq_rows = []
    n_rows = []
    for episode in episodes:
        report = episode.score
        if report.k_tilde is None:
            raise ValueError("variance check needs p_t on every period")
        gsq_rows.append(
            [float(ps.smoothed_gap) ** 2 for ps in report.per_point]
        )
        n_rows.append([ps.n for ps in report.per_point])
    if not gsq_rows:
        raise ValueError("no episodes given")
    return ratio_table(np.array(gsq_rows), np.array(n_rows), grid)
