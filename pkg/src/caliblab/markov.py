"""Move orders, count states, and Markov strategy tables.

The terminal score depends on a play history only through the per-point usage
and rain counts {(n(d), r(d))}, so strategies whose choice distribution is a
function of that count state lose nothing at the solved optimum.  Solved
strategies are stored as tables keyed by count state (plus the observed
forecast for the informed rainmaker in forecast-first order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .errors import StrategyError
from .fmt import format_fraction, is_rational, parse_number
from .scoring import Grid

Number = Union[Fraction, float]


class MoveOrder(Enum):
    """Within-period information: SIMULTANEOUS players act on the shared past;
    FORECAST_FIRST additionally shows the rainmaker the current forecast."""

    SIMULTANEOUS = "simultaneous"
    FORECAST_FIRST = "forecast-first"

    @classmethod
    def parse(cls, text: str) -> "MoveOrder":
        text = text.strip().lower().replace("_", "-")
        for order in cls:
            if order.value == text:
                return order
        raise ValueError(f"unknown move order {text!r}")


@dataclass(frozen=True)
class CountState:
    """Per grid point, (periods forecast d so far, how many of those rained)."""

    counts: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for n, r in self.counts:
            if not 0 <= r <= n:
                raise ValueError(f"invalid count pair (n={n}, r={r})")

    @property
    def time(self) -> int:
        return sum(n for n, _ in self.counts)

    @classmethod
    def empty(cls, n_points: int) -> "CountState":
        return cls(counts=((0, 0),) * n_points)

    def after(self, point_index: int, weather: int) -> "CountState":
        n, r = self.counts[point_index]
        new = list(self.counts)
        new[point_index] = (n + 1, r + weather)
        return CountState(counts=tuple(new))

    def key_str(self, grid: Grid) -> str:
        return ";".join(
            f"d={format_fraction(d)},n={n},r={r}"
            for d, (n, r) in zip(grid.points, self.counts)
        )

    @classmethod
    def from_key_str(cls, text: str, grid: Grid) -> "CountState":
        counts = [(0, 0)] * grid.n_points
        for part in text.split(";"):
            fields = dict(item.split("=", 1) for item in part.split(","))
            j = grid.index_of(parse_number(fields["d"]))
            counts[j] = (int(fields["n"]), int(fields["r"]))
        return cls(counts=tuple(counts))


RAINMAKER = "rainmaker"
FORECASTER = "forecaster"


def _default_grid(n_points: int) -> Grid:
    from .scoring import make_grid

    return make_grid(n_points)


@dataclass
class MarkovTable:
    """A strategy as a map from count state to a mixed action.

    Forecaster actions index the grid; rainmaker actions are (no rain, rain).
    In forecast-first order the rainmaker's key is (state, forecast index).
    ``default`` supplies the distribution for states with no explicit entry
    (e.g. a constant forecaster); with no default, a missing reachable state
    is an error.
    """

    player: str
    order: MoveOrder
    n_points: int
    entries: dict = field(default_factory=dict)
    default: Optional[tuple] = None

    @property
    def n_actions(self) -> int:
        return 2 if self.player == RAINMAKER else self.n_points

    def validate(self) -> None:
        if self.player not in (RAINMAKER, FORECASTER):
            raise StrategyError(f"unknown player {self.player!r}")
        for key, dist in self.entries.items():
            self._check_dist(dist, key)
        if self.default is not None:
            self._check_dist(self.default, "default")

    def _check_dist(self, dist, key) -> None:
        if len(dist) != self.n_actions:
            raise StrategyError(f"{self.player} entry {key}: wrong arity {len(dist)}")
        total = sum(dist)
        exact = all(is_rational(w) for w in dist)
        ok = total == 1 if exact else abs(total - 1) <= 1e-9
        if not ok or any(w < 0 for w in dist):
            raise StrategyError(f"{self.player} entry {key}: not a distribution {dist}")

    def dist(self, state: CountState, forecast_index: Optional[int] = None) -> tuple:
        if self.player == RAINMAKER and self.order is MoveOrder.FORECAST_FIRST:
            if forecast_index is None:
                raise StrategyError("informed rainmaker needs the forecast index")
            key = (state, forecast_index)
        else:
            key = state
        try:
            return self.entries[key]
        except KeyError:
            if self.default is not None:
                return self.default
            raise StrategyError(
                f"{self.player} strategy has no entry for reachable state {key}"
            ) from None

    # -- serialization ------------------------------------------------------

    def to_json_dict(self, grid: Optional[Grid] = None) -> dict:
        if grid is None:
            grid = _default_grid(self.n_points)
        def weight(w):
            return format_fraction(w) if is_rational(w) else float(w)

        def action_labels():
            if self.player == RAINMAKER:
                return ["0", "1"]
            return [format_fraction(d) for d in grid.points]

        labels = action_labels()
        entries = {}
        for key, dist in self.entries.items():
            if isinstance(key, tuple):
                state, j = key
                key_str = state.key_str(grid) + "|c=" + format_fraction(grid.points[j])
            else:
                key_str = key.key_str(grid)
            entries[key_str] = {lab: weight(w) for lab, w in zip(labels, dist)}
        out = {
            "player": self.player,
            "order": self.order.value,
            "n_points": self.n_points,
            "entries": entries,
        }
        if self.default is not None:
            out["default"] = {lab: weight(w) for lab, w in zip(labels, self.default)}
        return out

    @classmethod
    def from_json_dict(cls, data: dict, grid: Optional[Grid] = None) -> "MarkovTable":
        player = data["player"]
        order = MoveOrder.parse(data["order"])
        n_points = int(data["n_points"])
        if grid is None:
            grid = _default_grid(n_points)
        if n_points != grid.n_points:
            raise StrategyError(
                f"table built for a {n_points}-point grid, got {grid.n_points}"
            )

        def weight(w):
            return parse_number(w) if isinstance(w, str) else float(w)

        if player == RAINMAKER:
            labels = ["0", "1"]
        else:
            labels = [format_fraction(d) for d in grid.points]

        def parse_dist(obj):
            return tuple(weight(obj[lab]) for lab in labels)

        entries = {}
        for key_str, obj in data.get("entries", {}).items():
            if "|c=" in key_str:
                state_str, c_str = key_str.split("|c=", 1)
                state = CountState.from_key_str(state_str, grid)
                j = grid.index_of(parse_number(c_str))
                entries[(state, j)] = parse_dist(obj)
            else:
                entries[CountState.from_key_str(key_str, grid)] = parse_dist(obj)
        default = data.get("default")
        table = cls(
            player=player,
            order=order,
            n_points=n_points,
            entries=entries,
            default=None if default is None else parse_dist(default),
        )
        table.validate()
        return table


def constant_forecaster_table(grid: Grid, point, order: MoveOrder = MoveOrder.SIMULTANEOUS) -> MarkovTable:
    """A forecaster that plays one grid point at every state."""
    j = grid.index_of(point)
    dist = tuple(Fraction(1) if i == j else Fraction(0) for i in range(grid.n_points))
    return MarkovTable(player=FORECASTER, order=order, n_points=grid.n_points, default=dist)


def constant_rainmaker_table(grid: Grid, p, order: MoveOrder = MoveOrder.SIMULTANEOUS) -> MarkovTable:
    """A rainmaker that rains with fixed probability p at every state."""
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError(f"probability outside [0, 1]: {p}")
    return MarkovTable(
        player=RAINMAKER, order=order, n_points=grid.n_points, default=(1 - p, p)
    )
