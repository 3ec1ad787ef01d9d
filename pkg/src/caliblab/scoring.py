"""Forecast grid, transcripts, and calibration scores.

Forecasts live on the midpoint grid {1/(2N), 3/(2N), ..., (2N-1)/(2N)}: every
probability in [0, 1] is within 1/(2N) of a grid point and consecutive points
are exactly 1/N apart.  A transcript records, per period, the binary weather
a_t, the on-grid forecast c_t, and optionally the conditional rain probability
p_t that generated a_t.

The calibration score averages, over grid points, the usage-weighted distance
between each forecast value and the empirical rain frequency on the periods it
was used:

    K = sum_d (n(d)/T) |abar(d) - d| = (1/T) sum_d |G(d)|,
    G(d) = sum_t 1[c_t = d] (a_t - c_t)            (the per-point gap),
    Ksq = sum_d (n(d)/T) (abar(d) - d)^2           (squared variant),

plus smoothed counterparts that replace c_t with p_t when every p_t is known.
Scores are exact rationals by default; float mode exists for bulk Monte Carlo.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import TranscriptError
from .fmt import format_fraction, number_json, parse_number

Number = Union[Fraction, float]

#: At a midpoint tie (p = k/N, equidistant from two grid points) rounding
#: resolves to the LOWER point.  Any fixed rule works; this one is pinned so
#: transcripts and solved strategies are reproducible.
TIE_BREAK = "down"


@dataclass(frozen=True)
class Grid:
    """The forecast set: ``n_points`` midpoints of an even partition of [0, 1]."""

    n_points: int
    points: tuple[Fraction, ...]

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError(f"grid needs at least one point, got {self.n_points}")

    def index_of(self, value) -> int:
        """Index of an exact grid member; raises ValueError for anything else."""
        q = Fraction(value)
        k = (q * 2 * self.n_points + 1) / 2
        if k.denominator == 1 and 1 <= k <= self.n_points:
            return int(k) - 1
        raise ValueError(f"{value!r} is not a point of the {self.n_points}-point grid")

    def __contains__(self, value) -> bool:
        try:
            self.index_of(value)
            return True
        except (ValueError, TypeError):
            return False


def make_grid(n_points: int) -> Grid:
    """Build the grid {(2k-1)/(2N) : k = 1..N} as exact rationals."""
    if n_points < 1:
        raise ValueError(f"grid needs at least one point, got {n_points}")
    pts = tuple(Fraction(2 * k - 1, 2 * n_points) for k in range(1, n_points + 1))
    return Grid(n_points=n_points, points=pts)


def grid_index(p, n_points: int) -> int:
    """0-based index of the grid point nearest to ``p``, midpoint ties down.

    Exact for floats: ``p`` is converted to the rational it represents, so the
    tie rule fires only when p equals k/N as a real number.
    """
    q = Fraction(p)
    if q < 0 or q > 1:
        raise ValueError(f"probability outside [0, 1]: {p!r}")
    k = math.ceil(q * n_points)
    return max(1, k) - 1


def round_to_grid(p, grid: Grid) -> Fraction:
    """Nearest grid point to ``p`` in [0, 1]; guarantees |result - p| <= 1/(2N)."""
    return grid.points[grid_index(p, grid.n_points)]


# ---------------------------------------------------------------------------
# Transcripts


@dataclass(frozen=True)
class Step:
    """One period: weather a in {0, 1}, on-grid forecast c, optional prob p."""

    weather: int
    forecast: Fraction
    prob: Optional[Number] = None

    def __post_init__(self):
        if self.weather not in (0, 1):
            raise TranscriptError(f"weather must be 0 or 1, got {self.weather!r}")
        if self.prob is not None and not 0 <= self.prob <= 1:
            raise TranscriptError(f"probability outside [0, 1]: {self.prob!r}")


@dataclass(frozen=True)
class Transcript:
    """An immutable record of T played periods."""

    steps: tuple[Step, ...]

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def has_probs(self) -> bool:
        return len(self.steps) > 0 and all(s.prob is not None for s in self.steps)

    def validate_on_grid(self, grid: Grid) -> None:
        for t, step in enumerate(self.steps, start=1):
            if step.forecast not in grid:
                raise TranscriptError(
                    f"period {t}: forecast {step.forecast} is not on the "
                    f"{grid.n_points}-point grid"
                )


def write_transcript_csv(transcript: Transcript, path) -> None:
    """Write the documented `t,a,c,p` CSV (p column blank when unknown)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "a", "c", "p"])
        for t, step in enumerate(transcript.steps, start=1):
            p = "" if step.prob is None else fmt_prob(step.prob)
            writer.writerow([t, step.weather, format_fraction(step.forecast), p])


def fmt_prob(p: Number) -> str:
    if isinstance(p, Fraction):
        return format_fraction(p)
    return repr(float(p))


def read_transcript_csv(path) -> Transcript:
    """Read a `t,a,c,p` CSV.  Decimals parse to exact rationals; the p column
    is optional.  Grid membership is checked separately (the file does not
    carry N)."""
    steps = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["t", "a", "c"]:
            raise TranscriptError(f"{path}: expected header t,a,c[,p]")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                a = int(row[1])
                c = parse_number(row[2])
                p = None
                if len(row) > 3 and row[3].strip():
                    p = parse_number(row[3])
                steps.append(Step(weather=a, forecast=c, prob=p))
            except (ValueError, IndexError, TranscriptError) as exc:
                raise TranscriptError(f"{path}: line {lineno}: {exc}") from exc
    return Transcript(steps=tuple(steps))


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class PointScore:
    """Per grid point d: usage count n, rain frequency abar (None if unused),
    and gap G(d).  The smoothed gap is present only when every p_t is known."""

    point: Fraction
    n: int
    abar: Optional[Number]
    gap: Number
    smoothed_gap: Optional[Number] = None


@dataclass(frozen=True)
class ScoreReport:
    """All calibration scores of one transcript on one grid."""

    grid: Grid
    horizon: int
    mode: str
    per_point: tuple[PointScore, ...]
    k_score: Number
    k_sq_score: Number
    k_tilde: Optional[Number] = None

    def point_score(self, d) -> PointScore:
        return self.per_point[self.grid.index_of(d)]

    def to_json_dict(self) -> dict:
        return {
            "n_points": self.grid.n_points,
            "horizon": self.horizon,
            "mode": self.mode,
            "k_score": number_json(self.k_score),
            "k_sq_score": number_json(self.k_sq_score),
            "k_tilde": None if self.k_tilde is None else number_json(self.k_tilde),
            "per_point": [
                {
                    "d": number_json(ps.point),
                    "n": ps.n,
                    "abar": None if ps.abar is None else number_json(ps.abar),
                    "gap": number_json(ps.gap),
                    "smoothed_gap": (
                        None if ps.smoothed_gap is None else number_json(ps.smoothed_gap)
                    ),
                }
                for ps in self.per_point
            ],
        }


def score_report(transcript: Transcript, grid: Grid, mode: str = "exact") -> ScoreReport:
    """Score a transcript.

    Exact mode works entirely in integers over the common denominator 2N and
    returns Fractions; float mode mirrors the same accumulation order in
    doubles.  Unused grid points contribute 0 to every sum and get abar=None.
    """
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown scoring mode {mode!r}")
    T = transcript.horizon
    if T == 0:
        raise TranscriptError("cannot score an empty transcript")
    N = grid.n_points

    n = [0] * N
    r = [0] * N
    smoothed = transcript.has_probs
    if mode == "exact":
        psum: list = [Fraction(0)] * N
    else:
        psum = [0.0] * N
    for t, step in enumerate(transcript.steps, start=1):
        try:
            j = grid.index_of(step.forecast)
        except ValueError:
            raise TranscriptError(
                f"period {t}: forecast {step.forecast} is not on the "
                f"{N}-point grid"
            ) from None
        n[j] += 1
        r[j] += step.weather
        if smoothed:
            if mode == "exact":
                psum[j] += step.weather - Fraction(step.prob)
            else:
                psum[j] += step.weather - float(step.prob)

    points = grid.points
    per = []
    if mode == "exact":
        # G(d_k) scaled by 2N is the integer 2N r - n (2k-1).
        abs_gap_scaled = 0
        ksq = Fraction(0)
        ktilde_sum = Fraction(0)
        for j in range(N):
            gap_scaled = 2 * N * r[j] - n[j] * (2 * j + 1)
            gap = Fraction(gap_scaled, 2 * N)
            abs_gap_scaled += abs(gap_scaled)
            if n[j] > 0:
                abar = Fraction(r[j], n[j])
                ksq += gap * gap / n[j]
            else:
                abar = None
            sg = psum[j] if smoothed else None
            if smoothed:
                ktilde_sum += abs(psum[j])
            per.append(PointScore(points[j], n[j], abar, gap, sg))
        k = Fraction(abs_gap_scaled, 2 * N * T)
        ksq = ksq / T
        ktilde = ktilde_sum / T if smoothed else None
    else:
        dpts = [(2 * j + 1) / (2 * N) for j in range(N)]
        k = 0.0
        ksq = 0.0
        ktilde = 0.0 if smoothed else None
        for j in range(N):
            gap = r[j] - n[j] * dpts[j]
            k += abs(gap)
            if n[j] > 0:
                abar = r[j] / n[j]
                ksq += gap * gap / n[j]
            else:
                abar = None
            sg = psum[j] if smoothed else None
            if smoothed:
                ktilde += abs(psum[j])
            per.append(PointScore(points[j], n[j], abar, gap, sg))
        k /= T
        ksq /= T
        if smoothed:
            ktilde /= T

    return ScoreReport(
        grid=grid,
        horizon=T,
        mode=mode,
        per_point=tuple(per),
        k_score=k,
        k_sq_score=ksq,
        k_tilde=ktilde,
    )
