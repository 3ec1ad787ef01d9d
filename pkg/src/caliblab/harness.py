"""Reproducible Monte Carlo experiments, sweeps, and statistical summaries.

Replications are independent: replication r of an experiment with master seed
s draws from the stream keyed (s, r), so reruns are bit-identical and the
replication order is irrelevant.  Three evaluation routes exist:

  exhaustive   exact expectations by enumerating every weather/forecast
               realization (finitely supported rainmakers at toy sizes),
  sequential   one play_episode per replication (any spec pair),
  vectorized   a numpy fast path for memoryless spec pairs in float mode;
               it reproduces the sequential path decision for decision.

Sweeps run one experiment per (N, T) cell and fit the log-log slope of the
mean smoothed score against the horizon.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .bounds import BoundReport, PointRatio, bound_report, ratio_table
from .errors import ConfigurationError, ResourceLimitError
from .fmt import format_fraction
from .markov import CountState, MoveOrder
from .scoring import Grid, make_grid, grid_index
from .seeding import PROB_SLOT, WEATHER_SLOT, derive_row_seed, uniform_matrix
from .strategies import (
    BestResponse,
    ConstantForecast,
    CounterForecast,
    ForecasterSpec,
    GapChaser,
    IID,
    MarkovForecaster,
    PlaybackProb,
    RainmakerSpec,
    RevealedUniform,
    gap_chaser_weather,
    play_episode,
    spec_to_json,
    validate_specs,
)

EXHAUSTIVE_LEAF_LIMIT = 2_000_000


def worker_count() -> int:
    """CALIB_THREADS caps worker parallelism; default is single-threaded."""
    raw = os.environ.get("CALIB_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"CALIB_THREADS must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"CALIB_THREADS must be a positive integer, got {raw!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    n_points: int
    horizon: int
    rainmaker: RainmakerSpec
    forecaster: ForecasterSpec
    replications: int
    master_seed: int
    order: MoveOrder = MoveOrder.SIMULTANEOUS
    mode: str = "float"  # float | exact | exhaustive
    summary_path: Optional[str] = None
    per_rep_path: Optional[str] = None
    use_fast_path: Optional[bool] = None  # None = decide from the spec pair
    workers: Optional[int] = None

    def validate(self) -> Grid:
        if self.replications < 1:
            raise ConfigurationError(
                f"need at least one replication, got {self.replications}"
            )
        if self.mode not in ("float", "exact", "exhaustive"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        grid = make_grid(self.n_points)
        validate_specs(self.rainmaker, self.forecaster, grid, self.horizon, self.order)
        return grid


@dataclass(frozen=True)
class SummaryStats:
    n_points: int
    horizon: int
    order: MoveOrder
    mode: str
    replications: int
    rainmaker: dict
    forecaster: dict
    master_seed: int
    mean_k: float
    se_k: float
    mean_ksq: float
    se_ksq: float
    mean_k_tilde: Optional[float]
    se_k_tilde: Optional[float]
    usage: tuple[float, ...]
    ratios: Optional[tuple[PointRatio, ...]]
    bound: BoundReport
    checks: dict
    exact: Optional[dict] = None
    per_rep_k: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    per_rep_ksq: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    per_rep_k_tilde: Optional[np.ndarray] = field(
        default=None, repr=False, compare=False
    )

    def to_json_dict(self) -> dict:
        out = {
            "n_points": self.n_points,
            "horizon": self.horizon,
            "order": self.order.value,
            "mode": self.mode,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "rainmaker": self.rainmaker,
            "forecaster": self.forecaster,
            "mean_k": self.mean_k,
            "se_k": self.se_k,
            "mean_ksq": self.mean_ksq,
            "se_ksq": self.se_ksq,
            "mean_k_tilde": self.mean_k_tilde,
            "se_k_tilde": self.se_k_tilde,
            "usage": list(self.usage),
            "bound": self.bound.to_json_dict(),
            "checks": self.checks,
        }
        if self.ratios is not None:
            out["l2_ratios"] = [
                {
                    "d": format_fraction(pr.point),
                    "mean_gsq": pr.mean_gsq,
                    "mean_n": pr.mean_n,
                    "ratio": pr.ratio,
                    "se": pr.se,
                    "flagged": pr.flagged,
                }
                for pr in self.ratios
            ]
        if self.exact is not None:
            out["exact"] = {
                key: format_fraction(val) for key, val in self.exact.items()
            }
        return out


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, float("inf")
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def _checks(n: int, horizon: int, mean_k: float, se_k: float,
            mean_kt: Optional[float], se_kt: Optional[float]) -> dict:
    ceiling = 1.0 / n
    smoothed_ceiling = 0.5 * math.sqrt(n / horizon)
    out = {
        "horizon_at_least_main_threshold": horizon >= n**3,
        "mean_k_le_one_over_n": mean_k <= ceiling,
        "mean_k_le_one_over_n_plus_3se": mean_k <= ceiling + 3 * se_k,
        "smoothed_ceiling": smoothed_ceiling,
    }
    if mean_kt is not None:
        out["mean_k_tilde_le_ceiling_plus_3se"] = mean_kt <= smoothed_ceiling + 3 * se_kt
    return out


# ---------------------------------------------------------------------------
# Vectorized fast path (memoryless spec pairs, float mode)


def _float_prob_ok(p) -> bool:
    return isinstance(p, float) or Fraction(float(p)) == Fraction(p)


def fast_path_eligible(config: ExperimentConfig) -> bool:
    if config.mode != "float" or config.order is not MoveOrder.SIMULTANEOUS:
        return False
    rain, fore = config.rainmaker, config.forecaster
    if isinstance(rain, IID):
        rain_ok = _float_prob_ok(rain.p)
    elif isinstance(rain, RevealedUniform):
        rain_ok = True
    elif isinstance(rain, PlaybackProb):
        rain_ok = all(_float_prob_ok(p) for p in rain.probs)
    else:
        rain_ok = False
    return rain_ok and isinstance(fore, (BestResponse, ConstantForecast))


def _exact_round_indices(p: np.ndarray, n: int) -> np.ndarray:
    """Vectorized nearest-grid-point index with the exact midpoint-down rule.

    Float multiply can misplace points astronomically close to a cell
    boundary, so near-boundary entries are redone in exact rational
    arithmetic.
    """
    scaled = p * n
    k = np.ceil(scaled).astype(np.int64)
    np.clip(k, 1, n, out=k)
    near = np.abs(scaled - np.rint(scaled)) < 1e-9
    if near.any():
        for i in np.nonzero(near)[0]:
            k[i] = grid_index(float(p[i]), n) + 1
    return k - 1


def _fast_replication(config: ExperimentConfig, rep: int, n: int):
    """One replication without materializing a transcript.

    Accumulation order mirrors float-mode score_report exactly, so the
    resulting scores are bit-identical to the sequential path.
    """
    T = config.horizon
    uniforms = uniform_matrix(config.master_seed, rep, T)
    rain = config.rainmaker
    if isinstance(rain, IID):
        p = np.full(T, float(rain.p))
    elif isinstance(rain, RevealedUniform):
        p = uniforms[:, PROB_SLOT].copy()
    else:
        p = np.array([float(x) for x in rain.probs[:T]])
    if isinstance(config.forecaster, BestResponse):
        j = _exact_round_indices(p, n)
    else:
        j = np.full(T, grid_index(config.forecaster.point, n), dtype=np.int64)
    a = (uniforms[:, WEATHER_SLOT] < p).astype(np.float64)
    n_d = np.bincount(j, minlength=n).astype(np.int64)
    r_d = np.bincount(j, weights=a, minlength=n)
    g_tilde = np.bincount(j, weights=a - p, minlength=n)
    return n_d, r_d, g_tilde


def _run_fast(config: ExperimentConfig, grid: Grid) -> SummaryStats:
    n = grid.n_points
    T = config.horizon
    R = config.replications
    n_mat = np.empty((R, n), dtype=np.int64)
    r_mat = np.empty((R, n))
    gt_mat = np.empty((R, n))
    for rep in range(R):
        n_mat[rep], r_mat[rep], gt_mat[rep] = _fast_replication(config, rep, n)

    k_vec = np.zeros(R)
    ksq_vec = np.zeros(R)
    kt_vec = np.zeros(R)
    for d in range(n):
        dval = (2 * d + 1) / (2 * n)
        gap = r_mat[:, d] - n_mat[:, d] * dval
        k_vec += np.abs(gap)
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(n_mat[:, d] > 0, gap * gap / np.maximum(n_mat[:, d], 1), 0.0)
        ksq_vec += contrib
        kt_vec += np.abs(gt_mat[:, d])
    k_vec /= T
    ksq_vec /= T
    kt_vec /= T

    return _assemble(
        config,
        grid,
        k_vec,
        ksq_vec,
        kt_vec,
        n_mat,
        gt_mat**2,
    )


# ---------------------------------------------------------------------------
# Sequential path


def _sequential_replication(config: ExperimentConfig, rep: int, grid: Grid):
    result = play_episode(
        config.rainmaker,
        config.forecaster,
        grid,
        config.horizon,
        order=config.order,
        seed=config.master_seed,
        replication=rep,
        score_mode="float" if config.mode == "float" else "exact",
    )
    report = result.score
    k = float(report.k_score)
    ksq = float(report.k_sq_score)
    kt = None if report.k_tilde is None else float(report.k_tilde)
    ns = [ps.n for ps in report.per_point]
    gsq = None
    if report.k_tilde is not None:
        gsq = [float(ps.smoothed_gap) ** 2 for ps in report.per_point]
    return k, ksq, kt, ns, gsq


def _run_sequential(config: ExperimentConfig, grid: Grid) -> SummaryStats:
    R = config.replications
    workers = config.workers if config.workers is not None else worker_count()

    def job(rep):
        return _sequential_replication(config, rep, grid)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, range(R)))
    else:
        rows = [job(rep) for rep in range(R)]

    k_vec = np.array([row[0] for row in rows])
    ksq_vec = np.array([row[1] for row in rows])
    has_probs = all(row[2] is not None for row in rows)
    kt_vec = np.array([row[2] for row in rows]) if has_probs else None
    n_mat = np.array([row[3] for row in rows], dtype=np.int64)
    gsq_mat = np.array([row[4] for row in rows]) if has_probs else None
    return _assemble(config, grid, k_vec, ksq_vec, kt_vec, n_mat, gsq_mat)


def _assemble(config, grid, k_vec, ksq_vec, kt_vec, n_mat, gsq_mat,
              exact: Optional[dict] = None) -> SummaryStats:
    n = grid.n_points
    mean_k, se_k = _mean_se(k_vec)
    mean_ksq, se_ksq = _mean_se(ksq_vec)
    if kt_vec is not None:
        mean_kt, se_kt = _mean_se(kt_vec)
    else:
        mean_kt, se_kt = None, None
    usage = tuple(float(x) for x in n_mat.mean(axis=0) / config.horizon)
    ratios = None
    if gsq_mat is not None:
        ratios = tuple(ratio_table(gsq_mat, n_mat.astype(np.float64), grid))
    report = bound_report(n, config.horizon)
    stats = SummaryStats(
        n_points=n,
        horizon=config.horizon,
        order=config.order,
        mode=config.mode,
        replications=config.replications,
        rainmaker=spec_to_json(config.rainmaker),
        forecaster=spec_to_json(config.forecaster),
        master_seed=config.master_seed,
        mean_k=mean_k,
        se_k=se_k,
        mean_ksq=mean_ksq,
        se_ksq=se_ksq,
        mean_k_tilde=mean_kt,
        se_k_tilde=se_kt,
        usage=usage,
        ratios=ratios,
        bound=report,
        checks=_checks(n, config.horizon, mean_k, se_k, mean_kt, se_kt),
        exact=exact,
        per_rep_k=k_vec,
        per_rep_ksq=ksq_vec,
        per_rep_k_tilde=kt_vec,
    )
    return stats


# ---------------------------------------------------------------------------
# Exhaustive mode: exact expectations over all realizations


def _forecast_support(fore, p_t, grid: Grid, state: CountState):
    """(index, weight) pairs with positive weight for the next forecast."""
    if isinstance(fore, BestResponse):
        return [(grid_index(p_t, grid.n_points), Fraction(1))]
    if isinstance(fore, ConstantForecast):
        return [(grid.index_of(fore.point), Fraction(1))]
    dist = fore.table.dist(state)
    return [(j, Fraction(w)) for j, w in enumerate(dist) if w > 0]


def _exhaustive_leaf_estimate(config: ExperimentConfig) -> int:
    branch = 2
    if isinstance(config.forecaster, MarkovForecaster):
        branch *= config.n_points
    return branch**config.horizon


def _run_exhaustive(config: ExperimentConfig, grid: Grid) -> SummaryStats:
    if isinstance(config.rainmaker, RevealedUniform):
        raise ConfigurationError(
            "exhaustive mode needs a finitely supported rainmaker"
        )
    if config.horizon > 12 or config.n_points > 2:
        raise ConfigurationError(
            "exhaustive mode is limited to horizons up to 12 on grids of up "
            f"to 2 points, got N={config.n_points}, T={config.horizon}"
        )
    leaves = _exhaustive_leaf_estimate(config)
    if leaves > EXHAUSTIVE_LEAF_LIMIT:
        raise ResourceLimitError(f"exhaustive enumeration needs ~{leaves} leaves")

    n = grid.n_points
    T = config.horizon
    rain, fore = config.rainmaker, config.forecaster
    counts = [[0, 0] for _ in range(n)]
    sres = [Fraction(0)] * n  # per-point running sum of (a_t - p_t)

    acc = {
        "k": Fraction(0),
        "ksq": Fraction(0),
        "kt": Fraction(0),
    }
    usage = [Fraction(0)] * n
    gsq = [Fraction(0)] * n

    def leaf(weight: Fraction):
        scaled = 0
        ksq = Fraction(0)
        kt = Fraction(0)
        for j in range(n):
            g_scaled = 2 * n * counts[j][1] - counts[j][0] * (2 * j + 1)
            scaled += abs(g_scaled)
            if counts[j][0] > 0:
                gap = Fraction(g_scaled, 2 * n)
                ksq += gap * gap / counts[j][0]
            kt += abs(sres[j])
            usage[j] += weight * counts[j][0]
            gsq[j] += weight * sres[j] * sres[j]
        acc["k"] += weight * Fraction(scaled, 2 * n * T)
        acc["ksq"] += weight * ksq / T
        acc["kt"] += weight * kt / T

    def state_of():
        return CountState(counts=tuple((nn, rr) for nn, rr in counts))

    def recurse(t: int, weight: Fraction):
        if t == T:
            leaf(weight)
            return
        if isinstance(rain, CounterForecast):
            p_pre = None
        elif isinstance(rain, IID):
            p_pre = Fraction(rain.p)
        elif isinstance(rain, PlaybackProb):
            p_pre = Fraction(rain.probs[t])
        elif isinstance(rain, GapChaser):
            p_pre = Fraction(gap_chaser_weather(counts, grid))
        else:
            raise ConfigurationError(f"unsupported rainmaker {rain!r}")
        for j, w_c in _forecast_support(fore, p_pre, grid, state_of()):
            if isinstance(rain, CounterForecast):
                p_t = Fraction(1) if grid.points[j] < Fraction(1, 2) else Fraction(0)
            else:
                p_t = p_pre
            for a, w_a in ((1, p_t), (0, 1 - p_t)):
                if w_a == 0:
                    continue
                counts[j][0] += 1
                counts[j][1] += a
                sres[j] += a - p_t
                recurse(t + 1, weight * w_c * w_a)
                sres[j] -= a - p_t
                counts[j][1] -= a
                counts[j][0] -= 1

    recurse(0, Fraction(1))

    exact = {
        "mean_k": acc["k"],
        "mean_ksq": acc["ksq"],
        "mean_k_tilde": acc["kt"],
    }
    mean_k = float(acc["k"])
    mean_ksq = float(acc["ksq"])
    mean_kt = float(acc["kt"])
    usage_f = tuple(float(u) / T for u in usage)
    # Exact expectations: flag by exact comparison, no standard error.
    ratios = tuple(
        PointRatio(
            point=grid.points[j],
            mean_gsq=float(gsq[j]),
            mean_n=float(usage[j]),
            ratio=0.0 if usage[j] == 0 else float(gsq[j] / usage[j]),
            se=0.0,
            flagged=usage[j] > 0 and gsq[j] > usage[j] / 4,
        )
        for j in range(n)
    )
    report = bound_report(n, T)
    return SummaryStats(
        n_points=n,
        horizon=T,
        order=config.order,
        mode=config.mode,
        replications=1,
        rainmaker=spec_to_json(rain),
        forecaster=spec_to_json(fore),
        master_seed=config.master_seed,
        mean_k=mean_k,
        se_k=0.0,
        mean_ksq=mean_ksq,
        se_ksq=0.0,
        mean_k_tilde=mean_kt,
        se_k_tilde=0.0,
        usage=usage_f,
        ratios=ratios,
        bound=report,
        checks=_checks(n, T, mean_k, 0.0, mean_kt, 0.0),
        exact=exact,
    )


# ---------------------------------------------------------------------------
# Entry points


def run_experiment(config: ExperimentConfig) -> SummaryStats:
    """Run the configured experiment; reruns are bit-identical."""
    grid = config.validate()
    if config.mode == "exhaustive":
        stats = _run_exhaustive(config, grid)
    else:
        fast = config.use_fast_path
        if fast is None:
            fast = fast_path_eligible(config)
        elif fast and not fast_path_eligible(config):
            raise ConfigurationError("configuration is not fast-path eligible")
        stats = _run_fast(config, grid) if fast else _run_sequential(config, grid)
    if config.summary_path:
        with open(config.summary_path, "w") as fh:
            json.dump(stats.to_json_dict(), fh, indent=2)
    if config.per_rep_path:
        write_per_rep_csv(stats, config.per_rep_path)
    return stats


def write_per_rep_csv(stats: SummaryStats, path: str) -> None:
    if stats.per_rep_k is None:
        raise ConfigurationError("no per-replication scores in exhaustive mode")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "k", "ksq", "k_tilde"])
        for rep in range(len(stats.per_rep_k)):
            kt = "" if stats.per_rep_k_tilde is None else repr(
                float(stats.per_rep_k_tilde[rep])
            )
            writer.writerow(
                [rep, repr(float(stats.per_rep_k[rep])),
                 repr(float(stats.per_rep_ksq[rep])), kt]
            )


# ---------------------------------------------------------------------------
# Sweeps


@dataclass(frozen=True)
class SlopeFit:
    n_points: int
    metric: str
    slope: float
    stderr: float
    points: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SummaryStats, ...]
    fits: tuple[SlopeFit, ...]

    def to_json_dict(self) -> dict:
        return {
            "rows": [row.to_json_dict() for row in self.rows],
            "fits": [
                {
                    "n_points": f.n_points,
                    "metric": f.metric,
                    "slope": f.slope,
                    "stderr": f.stderr,
                    "points": f.points,
                }
                for f in self.fits
            ],
        }


def ols_slope(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of y on x and its standard error."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size < 3:
        raise ValueError("need at least 3 points for a slope with an error bar")
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = x.size - 2
    s2 = float((resid**2).sum() / dof) if dof > 0 else float("nan")
    return slope, math.sqrt(s2 / sxx)


def sweep(
    base: ExperimentConfig,
    horizons: Sequence[int],
    grids: Optional[Sequence[int]] = None,
) -> SweepResult:
    """One experiment per (N, T) cell plus per-N log-log slope fits.

    Each cell gets its own derived seed so cells are independent; the fit
    uses the smoothed score when every cell defines it, else the raw score.
    """
    if not horizons:
        raise ConfigurationError("sweep needs at least one horizon")
    ns = list(grids) if grids else [base.n_points]
    rows = []
    by_n: dict[int, list[SummaryStats]] = {}
    for n in ns:
        for T in horizons:
            cell = replace(
                base,
                n_points=n,
                horizon=T,
                master_seed=derive_row_seed(base.master_seed, n, T),
                summary_path=None,
                per_rep_path=None,
            )
            stats = run_experiment(cell)
            rows.append(stats)
            by_n.setdefault(n, []).append(stats)

    fits = []
    for n, cells in by_n.items():
        if len(cells) < 3:
            continue
        use_tilde = all(
            c.mean_k_tilde is not None and c.mean_k_tilde > 0 for c in cells
        )
        metric = "k_tilde" if use_tilde else "k"
        ys = [
            math.log(c.mean_k_tilde if use_tilde else c.mean_k) for c in cells
        ]
        xs = [math.log(c.horizon) for c in cells]
        slope, stderr = ols_slope(xs, ys)
        fits.append(
            SlopeFit(
                n_points=n, metric=metric, slope=slope, stderr=stderr,
                points=len(cells),
            )
        )
    return SweepResult(rows=tuple(rows), fits=tuple(fits))


SWEEP_CSV_FIELDS = [
    "N", "T", "order", "mode", "reps", "mean_k", "se_k", "mean_ksq",
    "mean_k_tilde", "se_k_tilde", "main_bound", "main_threshold",
]


def write_sweep_csv(result: SweepResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_FIELDS)
        writer.writeheader()
        for row in result.rows:
            writer.writerow(
                {
                    "N": row.n_points,
                    "T": row.horizon,
                    "order": row.order.value,
                    "mode": row.mode,
                    "reps": row.replications,
                    "mean_k": repr(row.mean_k),
                    "se_k": repr(row.se_k),
                    "mean_ksq": repr(row.mean_ksq),
                    "mean_k_tilde": "" if row.mean_k_tilde is None else repr(row.mean_k_tilde),
                    "se_k_tilde": "" if row.se_k_tilde is None else repr(row.se_k_tilde),
                    "main_bound": repr(row.bound.main_bound),
                    "main_threshold": row.bound.main_threshold,
                }
            )
