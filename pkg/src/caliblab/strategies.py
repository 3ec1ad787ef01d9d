"""Rainmaker and forecaster strategies, and single-episode play.

Rainmakers choose the weather a_t in {0, 1}; all but CounterForecast define a
conditional rain probability p_t that is measurable with respect to the shared
past, so the best-response forecaster (round p_t to the grid) is well defined
against them.  CounterForecast reacts to the current forecast and therefore
only exists in forecast-first order.

Episodes are bit-reproducible: all randomness comes from the per-replication
uniform matrix (see seeding), consumed positionally by slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import ConfigurationError, HorizonError
from .fmt import parse_number
from .markov import FORECASTER, CountState, MarkovTable, MoveOrder
from .scoring import Grid, ScoreReport, Step, Transcript, round_to_grid, score_report
from .seeding import PROB_SLOT, WEATHER_SLOT, FORECAST_SLOT, uniform_matrix


@dataclass(frozen=True)
class IID:
    """Rain with a fixed probability every period."""

    p: Union[Fraction, float]

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ConfigurationError(f"probability outside [0, 1]: {self.p!r}")


@dataclass(frozen=True)
class RevealedUniform:
    """Draws a fresh p_t uniform on [0, 1] each period and reveals it."""


@dataclass(frozen=True)
class PlaybackProb:
    """Plays back a fixed, revealed list of rain probabilities."""

    probs: tuple

    def __post_init__(self):
        if any(not 0 <= p <= 1 for p in self.probs):
            raise ConfigurationError("playback probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class GapChaser:
    """Deterministic adaptive rainmaker: picks the weather that maximizes the
    summed absolute gaps, assuming the forecaster repeats its most frequent
    past forecast (smallest such point on ties).  Weather ties and the empty
    history resolve to rain."""


@dataclass(frozen=True)
class CounterForecast:
    """Forecast-first only: rains exactly when the current forecast is below
    one half."""


RainmakerSpec = Union[IID, RevealedUniform, PlaybackProb, GapChaser, CounterForecast]


@dataclass(frozen=True)
class BestResponse:
    """Rounds the rainmaker's conditional probability to the grid."""


@dataclass(frozen=True)
class ConstantForecast:
    point: Fraction


@dataclass(frozen=True)
class MarkovForecaster:
    """Plays a solved count-state strategy table."""

    table: MarkovTable


ForecasterSpec = Union[BestResponse, ConstantForecast, MarkovForecaster]


# ---------------------------------------------------------------------------
# JSON round trip for specs


def spec_to_json(spec) -> dict:
    if isinstance(spec, IID):
        return {"kind": "iid", "params": {"p": _num_out(spec.p)}}
    if isinstance(spec, RevealedUniform):
        return {"kind": "revealed-uniform", "params": {}}
    if isinstance(spec, PlaybackProb):
        return {"kind": "playback", "params": {"probs": [_num_out(p) for p in spec.probs]}}
    if isinstance(spec, GapChaser):
        return {"kind": "gap-chaser", "params": {}}
    if isinstance(spec, CounterForecast):
        return {"kind": "counter-forecast", "params": {}}
    if isinstance(spec, BestResponse):
        return {"kind": "best-response", "params": {}}
    if isinstance(spec, ConstantForecast):
        return {"kind": "constant", "params": {"point": _num_out(spec.point)}}
    if isinstance(spec, MarkovForecaster):
        return {"kind": "markov", "params": {"table": spec.table.to_json_dict()}}
    raise ConfigurationError(f"unknown spec {spec!r}")


def _num_out(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return float(x)


def spec_from_json(data: dict):
    kind = data.get("kind")
    params = data.get("params", {})
    if kind == "iid":
        p = params["p"]
        return IID(p=parse_number(p) if isinstance(p, str) else p)
    if kind == "revealed-uniform":
        return RevealedUniform()
    if kind == "playback":
        probs = tuple(
            parse_number(p) if isinstance(p, str) else p for p in params["probs"]
        )
        return PlaybackProb(probs=probs)
    if kind == "gap-chaser":
        return GapChaser()
    if kind == "counter-forecast":
        return CounterForecast()
    if kind == "best-response":
        return BestResponse()
    if kind == "constant":
        pt = params["point"]
        return ConstantForecast(point=parse_number(pt) if isinstance(pt, str) else Fraction(pt))
    if kind == "markov":
        return MarkovForecaster(table=MarkovTable.from_json_dict(params["table"]))
    raise ConfigurationError(f"unknown spec kind {kind!r}")


def spec_json_str(spec) -> str:
    return json.dumps(spec_to_json(spec))


# ---------------------------------------------------------------------------
# Conditional rain probability


def _counts_from_history(history: Sequence[Step], grid: Grid) -> list[list[int]]:
    counts = [[0, 0] for _ in range(grid.n_points)]
    for step in history:
        j = grid.index_of(step.forecast)
        counts[j][0] += 1
        counts[j][1] += step.weather
    return counts


def gap_chaser_weather(counts: Sequence[Sequence[int]], grid: Grid) -> int:
    """The GapChaser decision at a count state (1 on empty history or ties)."""
    used = [j for j in range(grid.n_points) if counts[j][0] > 0]
    if not used:
        return 1
    target = max(used, key=lambda j: (counts[j][0], -j))
    n, r = counts[target]
    d = grid.points[target]
    gap = Fraction(r) - n * d
    if abs(gap + 1 - d) >= abs(gap - d):
        return 1
    return 0


def rainmaker_prob(
    spec: RainmakerSpec,
    history: Sequence[Step],
    grid: Grid,
    u: Optional[float] = None,
):
    """The conditional rain probability for the next period.

    RevealedUniform consumes the uniform draw ``u``; the other variants are
    deterministic functions of the history.  CounterForecast has no
    pre-forecast probability and is rejected here.
    """
    t = len(history)
    if isinstance(spec, IID):
        return spec.p
    if isinstance(spec, RevealedUniform):
        if u is None:
            raise ConfigurationError("RevealedUniform needs a uniform draw")
        return float(u)
    if isinstance(spec, PlaybackProb):
        if t >= len(spec.probs):
            raise HorizonError(
                f"playback has {len(spec.probs)} probabilities, period {t + 1} requested"
            )
        return spec.probs[t]
    if isinstance(spec, GapChaser):
        return Fraction(gap_chaser_weather(_counts_from_history(history, grid), grid))
    if isinstance(spec, CounterForecast):
        raise ConfigurationError(
            "CounterForecast reacts to the current forecast; it has no "
            "pre-forecast rain probability"
        )
    raise ConfigurationError(f"unknown rainmaker spec {spec!r}")


def best_response_forecast(p, grid: Grid) -> Fraction:
    """The best-response forecast: round the known rain probability to the
    grid (midpoint ties down)."""
    return round_to_grid(p, grid)


# ---------------------------------------------------------------------------
# Episode play


@dataclass(frozen=True)
class EpisodeResult:
    transcript: Transcript
    score: ScoreReport


def validate_specs(
    rain: RainmakerSpec,
    fore: ForecasterSpec,
    grid: Grid,
    horizon: int,
    order: MoveOrder,
) -> None:
    if horizon < 1:
        raise ConfigurationError(f"horizon must be positive, got {horizon}")
    if isinstance(rain, CounterForecast) and order is not MoveOrder.FORECAST_FIRST:
        raise ConfigurationError("CounterForecast requires forecast-first order")
    if isinstance(rain, CounterForecast) and isinstance(fore, BestResponse):
        raise ConfigurationError(
            "BestResponse needs a rainmaker with a pre-forecast rain probability"
        )
    if isinstance(rain, PlaybackProb) and len(rain.probs) < horizon:
        raise HorizonError(
            f"playback has {len(rain.probs)} probabilities for horizon {horizon}"
        )
    if isinstance(fore, ConstantForecast) and fore.point not in grid:
        raise ConfigurationError(
            f"constant forecast {fore.point} is not on the {grid.n_points}-point grid"
        )
    if isinstance(fore, MarkovForecaster) and fore.table.n_points != grid.n_points:
        raise ConfigurationError("forecaster table was built for a different grid")


def _sample_index(dist: Sequence, u: float) -> int:
    acc = 0
    for j, w in enumerate(dist):
        acc = acc + w
        if u < acc:
            return j
    return len(dist) - 1


def play_episode(
    rain: RainmakerSpec,
    fore: ForecasterSpec,
    grid: Grid,
    horizon: int,
    order: MoveOrder = MoveOrder.SIMULTANEOUS,
    seed: int = 0,
    replication: int = 0,
    score_mode: str = "exact",
) -> EpisodeResult:
    """Simulate one episode; identical arguments give a bit-identical result."""
    validate_specs(rain, fore, grid, horizon, order)
    uniforms = uniform_matrix(seed, replication, horizon)
    counts = [[0, 0] for _ in range(grid.n_points)]
    state = CountState.empty(grid.n_points)  # tracked only for Markov tables
    steps = []
    for t in range(horizon):
        u_prob = float(uniforms[t, PROB_SLOT])
        u_weather = float(uniforms[t, WEATHER_SLOT])
        u_fore = float(uniforms[t, FORECAST_SLOT])

        if isinstance(rain, CounterForecast):
            p_t = None  # determined after the forecast
        elif isinstance(rain, IID):
            p_t = rain.p
        elif isinstance(rain, RevealedUniform):
            p_t = u_prob
        elif isinstance(rain, PlaybackProb):
            p_t = rain.probs[t]
        elif isinstance(rain, GapChaser):
            p_t = Fraction(gap_chaser_weather(counts, grid))
        else:
            raise ConfigurationError(f"unknown rainmaker spec {rain!r}")

        if isinstance(fore, BestResponse):
            j = grid.index_of(round_to_grid(p_t, grid))
        elif isinstance(fore, ConstantForecast):
            j = grid.index_of(fore.point)
        elif isinstance(fore, MarkovForecaster):
            j = _sample_index(fore.table.dist(state), u_fore)
        else:
            raise ConfigurationError(f"unknown forecaster spec {fore!r}")
        c_t = grid.points[j]

        if isinstance(rain, CounterForecast):
            p_t = Fraction(1) if c_t < Fraction(1, 2) else Fraction(0)

        a_t = 1 if u_weather < p_t else 0
        steps.append(Step(weather=a_t, forecast=c_t, prob=p_t))
        counts[j][0] += 1
        counts[j][1] += a_t
        if isinstance(fore, MarkovForecaster):
            state = state.after(j, a_t)

    transcript = Transcript(steps=tuple(steps))
    return EpisodeResult(
        transcript=transcript, score=score_report(transcript, grid, mode=score_mode)
    )
