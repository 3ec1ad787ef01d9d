"""Exact value of the finite T-period calibration game by backward induction.

The terminal score depends on a history only through the count state
{(n(d), r(d))}, so the dynamic program runs over count states layer by layer
(layer t holds the states with sum n(d) = t; only two layers are resident
while solving).  Each interior state is a stage game with rainmaker rows
{no rain, rain} and one forecaster column per grid point, whose entries are
the successor values:

  SIMULTANEOUS    solve the 2 x N stage game exactly,
  FORECAST_FIRST  the informed rainmaker best-responds per column, so the
                  forecaster's optimal stage choice is a pure column:
                  value = min_d max_a V(state + (a, d)).

A history-tree evaluator with no aggregation exists as the brute-force oracle
for toy sizes.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb
from typing import Optional

import numpy as np

from .errors import ResourceLimitError, StrategyError
from .fmt import fmt12, format_fraction, is_rational, number_json
from .markov import FORECASTER, RAINMAKER, CountState, MarkovTable, MoveOrder
from .matrixgame import _two_row_solve, exact_number
from .scoring import Grid

DEFAULT_MAX_STATES = 5_000_000


def layer_size(n_points: int, t: int) -> int:
    """Number of count states with sum n(d) = t."""
    return comb(t + 2 * n_points - 1, 2 * n_points - 1)


def total_states(n_points: int, horizon: int) -> int:
    return comb(horizon + 2 * n_points, 2 * n_points)


def _compositions(total: int, parts: int):
    """All tuples of `parts` nonnegative ints summing to `total`, lex order."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _strides(radices: tuple[int, ...]) -> tuple[int, ...]:
    out = [1] * len(radices)
    for i in range(len(radices) - 2, -1, -1):
        out[i] = out[i + 1] * radices[i + 1]
    return tuple(out)


class Layer:
    """Dense indexing of the count states at one time step."""

    def __init__(self, n_points: int, t: int):
        self.t = t
        self.comps: list[tuple[int, ...]] = list(_compositions(t, n_points))
        self.comp_offset: dict[tuple[int, ...], int] = {}
        self.comp_strides: dict[tuple[int, ...], tuple[int, ...]] = {}
        offset = 0
        for comp in self.comps:
            radices = tuple(n + 1 for n in comp)
            self.comp_offset[comp] = offset
            self.comp_strides[comp] = _strides(radices)
            size = 1
            for rad in radices:
                size *= rad
            offset += size
        self.size = offset

    def index_of(self, state: CountState) -> int:
        comp = tuple(n for n, _ in state.counts)
        strides = self.comp_strides[comp]
        return self.comp_offset[comp] + sum(
            r * s for (_, r), s in zip(state.counts, strides)
        )

    def states(self):
        """Yields (index, comp, rain vector) over the whole layer."""
        for comp in self.comps:
            offset = self.comp_offset[comp]
            for rank, rvec in enumerate(product(*(range(n + 1) for n in comp))):
                yield offset + rank, comp, rvec


@dataclass
class StateSpace:
    grid: Grid
    horizon: int
    layers: list[Layer]

    @property
    def total(self) -> int:
        return sum(layer.size for layer in self.layers)


def enumerate_states(
    grid: Grid,
    horizon: int,
    *,
    max_states: int = DEFAULT_MAX_STATES,
    verbose: bool = True,
) -> StateSpace:
    """Build dense per-layer state indices, within the given budget.

    The total count C(T + 2N, 2N) is computed (and printed when verbose)
    before anything is allocated; exceeding ``max_states`` raises
    ResourceLimitError up front.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n = grid.n_points
    total = total_states(n, horizon)
    largest = layer_size(n, horizon)
    if verbose:
        print(
            f"state space: N={n} T={horizon}: {total} states in {horizon + 1} "
            f"layers (largest layer {largest})",
            file=sys.stderr,
        )
    if total > max_states:
        raise ResourceLimitError(
            f"count-state space needs {total} states "
            f"(> budget {max_states}) for N={n}, T={horizon}"
        )
    layers = [Layer(n, t) for t in range(horizon + 1)]
    return StateSpace(grid=grid, horizon=horizon, layers=layers)


# ---------------------------------------------------------------------------
# Terminal scores


def terminal_score(comp, rvec, n_points: int, horizon: int, exact: bool):
    """Final score (1/T) sum_d |r_d - n_d d| from integer counts."""
    scaled = 0
    for j in range(n_points):
        scaled += abs(2 * n_points * rvec[j] - comp[j] * (2 * j + 1))
    if exact:
        return Fraction(scaled, 2 * n_points * horizon)
    return scaled / (2 * n_points * horizon)


# ---------------------------------------------------------------------------
# Backward induction


@dataclass
class ValueTable:
    """Solved game: exact value, per-layer values, and extracted strategies."""

    grid: Grid
    horizon: int
    order: MoveOrder
    mode: str
    value: object
    rain: MarkovTable
    fore: MarkovTable
    space: StateSpace
    values: Optional[list] = None

    def value_at(self, state: CountState):
        if self.values is None:
            raise ValueError("value table was built with keep_values=False")
        layer = self.space.layers[state.time]
        return self.values[state.time][layer.index_of(state)]

    def to_json_dict(self, include_values: bool = True) -> dict:
        out = {
            "n_points": self.grid.n_points,
            "horizon": self.horizon,
            "order": self.order.value,
            "mode": self.mode,
            "value": number_json(self.value),
            "rainmaker": self.rain.to_json_dict(self.grid),
            "forecaster": self.fore.to_json_dict(self.grid),
        }
        if include_values and self.values is not None:
            layers = []
            for t, layer in enumerate(self.space.layers):
                vals = self.values[t]
                entry = {}
                for idx, comp, rvec in layer.states():
                    state = CountState(counts=tuple(zip(comp, rvec)))
                    entry[state.key_str(self.grid)] = number_json(vals[idx])
                layers.append(entry)
            out["values"] = layers
        return out

    def csv_row(self) -> dict:
        from .bounds import bound_report

        report = bound_report(self.grid.n_points, self.horizon)
        return {
            "N": self.grid.n_points,
            "T": self.horizon,
            "order": self.order.value,
            "value": fmt12(self.value),
            "value_rational": (
                format_fraction(self.value) if is_rational(self.value) else ""
            ),
            "main_bound": fmt12(report.main_bound),
        }


def default_mode(n_points: int, horizon: int) -> str:
    """Exact rationals at desk scale, floats beyond."""
    return "exact" if n_points <= 2 and horizon <= 16 else "float"


def backward_induction(
    grid: Grid,
    horizon: int,
    order: MoveOrder = MoveOrder.SIMULTANEOUS,
    *,
    mode: Optional[str] = None,
    keep_values: bool = True,
    max_states: int = DEFAULT_MAX_STATES,
    verbose: bool = False,
) -> ValueTable:
    """Solve the T-period game; V_0(empty) is the exact minimax value of the
    expected score with the rainmaker maximizing and the forecaster minimizing.
    """
    if mode is None:
        mode = default_mode(grid.n_points, horizon)
    if mode not in ("exact", "float"):
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    exact = mode == "exact"
    N = grid.n_points
    space = enumerate_states(grid, horizon, max_states=max_states, verbose=verbose)

    rain_entries: dict = {}
    fore_entries: dict = {}

    def new_layer_values(size):
        return [None] * size if exact else np.empty(size, dtype=np.float64)

    term = space.layers[horizon]
    v_next = new_layer_values(term.size)
    denom = 2 * N * horizon
    for idx, comp, rvec in term.states():
        scaled = sum(
            abs(2 * N * rvec[j] - comp[j] * (2 * j + 1)) for j in range(N)
        )
        v_next[idx] = exact_number(scaled) / denom if exact else scaled / denom
    kept = [v_next] if keep_values else None

    for t in range(horizon - 1, -1, -1):
        layer = space.layers[t]
        nxt = space.layers[t + 1]
        v_here = new_layer_values(layer.size)
        for comp in layer.comps:
            offset = layer.comp_offset[comp]
            succ = []
            for d in range(N):
                comp2 = comp[:d] + (comp[d] + 1,) + comp[d + 1 :]
                succ.append((nxt.comp_offset[comp2], nxt.comp_strides[comp2]))
            for rank, rvec in enumerate(product(*(range(n + 1) for n in comp))):
                row0 = []
                row1 = []
                for d in range(N):
                    off2, strides2 = succ[d]
                    base = off2
                    for i in range(N):
                        base += rvec[i] * strides2[i]
                    row0.append(v_next[base])
                    row1.append(v_next[base + strides2[d]])
                state = CountState(counts=tuple(zip(comp, rvec)))
                if order is MoveOrder.SIMULTANEOUS:
                    sol = _two_row_solve(tuple(row0), tuple(row1), exact)
                    v_here[offset + rank] = sol.value
                    rain_entries[state] = sol.row_mix
                    fore_entries[state] = sol.col_mix
                else:
                    best_d, best_v = None, None
                    for d in range(N):
                        # Informed rainmaker: ties go to rain.
                        a = 1 if row1[d] >= row0[d] else 0
                        hi = row1[d] if a == 1 else row0[d]
                        rain_entries[(state, d)] = (1 - a, a) if not exact else (
                            Fraction(1 - a),
                            Fraction(a),
                        )
                        if best_v is None or hi < best_v:
                            best_v, best_d = hi, d
                    v_here[offset + rank] = best_v
                    one = Fraction(1) if exact else 1.0
                    zero = one - one
                    fore_entries[state] = tuple(
                        one if d == best_d else zero for d in range(N)
                    )
        v_next = v_here
        if keep_values:
            kept.insert(0, v_here)

    value = v_next[0]
    rain = MarkovTable(player=RAINMAKER, order=order, n_points=N, entries=rain_entries)
    fore = MarkovTable(player=FORECASTER, order=order, n_points=N, entries=fore_entries)
    return ValueTable(
        grid=grid,
        horizon=horizon,
        order=order,
        mode=mode,
        value=value,
        rain=rain,
        fore=fore,
        space=space,
        values=kept,
    )


# ---------------------------------------------------------------------------
# Best responses and exploitability


def best_response_value(
    grid: Grid,
    horizon: int,
    order: MoveOrder,
    opponent: MarkovTable,
    responder: str,
    *,
    mode: str = "exact",
):
    """Exact value the responder secures against a fixed Markov opponent.

    Runs over the forward-reachable states only, so a table covering exactly
    the opponent's reachable support is legal; a gap there raises
    StrategyError.
    """
    if responder not in (RAINMAKER, FORECASTER):
        raise ValueError(f"unknown responder {responder!r}")
    exact = mode == "exact"
    N = grid.n_points

    reach: list[set[CountState]] = [set() for _ in range(horizon + 1)]
    reach[0].add(CountState.empty(N))
    for t in range(horizon):
        for state in reach[t]:
            if responder == FORECASTER:
                # Opponent is the rainmaker; its support may depend on the
                # forecast in forecast-first order, responder tries every d.
                for d in range(N):
                    fc = d if order is MoveOrder.FORECAST_FIRST else None
                    dist = opponent.dist(state, fc) if fc is not None else opponent.dist(state)
                    for a in (0, 1):
                        if dist[a] > 0:
                            reach[t + 1].add(state.after(d, a))
            else:
                dist = opponent.dist(state)
                for d in range(N):
                    if dist[d] > 0:
                        for a in (0, 1):
                            reach[t + 1].add(state.after(d, a))

    v_next: dict[CountState, object] = {}
    for state in reach[horizon]:
        comp = tuple(n for n, _ in state.counts)
        rvec = tuple(r for _, r in state.counts)
        v_next[state] = terminal_score(comp, rvec, N, horizon, exact)

    for t in range(horizon - 1, -1, -1):
        v_here: dict[CountState, object] = {}
        for state in reach[t]:
            if responder == RAINMAKER:
                y = opponent.dist(state)
                if order is MoveOrder.SIMULTANEOUS:
                    best = None
                    for a in (0, 1):
                        total = sum(
                            y[d] * v_next[state.after(d, a)]
                            for d in range(N)
                            if y[d] > 0
                        )
                        if best is None or total > best:
                            best = total
                    v_here[state] = best
                else:
                    v_here[state] = sum(
                        y[d]
                        * max(v_next[state.after(d, 0)], v_next[state.after(d, 1)])
                        for d in range(N)
                        if y[d] > 0
                    )
            else:
                best = None
                for d in range(N):
                    fc = d if order is MoveOrder.FORECAST_FIRST else None
                    x = opponent.dist(state, fc) if fc is not None else opponent.dist(state)
                    total = sum(
                        x[a] * v_next[state.after(d, a)] for a in (0, 1) if x[a] > 0
                    )
                    if best is None or total < best:
                        best = total
                v_here[state] = best
        v_next = v_here

    return v_next[CountState.empty(N)]


@dataclass(frozen=True)
class ExploitabilityReport:
    """Best-response values against each fixed strategy and the deviations
    from the solved game value (both zero exactly at the saddle point)."""

    game_value: object
    rain_br_value: object
    fore_br_value: object

    @property
    def rain_gain(self):
        return self.rain_br_value - self.game_value

    @property
    def fore_gain(self):
        return self.game_value - self.fore_br_value


def exploitability(
    table: ValueTable,
    *,
    rain: Optional[MarkovTable] = None,
    fore: Optional[MarkovTable] = None,
) -> ExploitabilityReport:
    rain = rain if rain is not None else table.rain
    fore = fore if fore is not None else table.fore
    rain_br = best_response_value(
        table.grid, table.horizon, table.order, fore, RAINMAKER, mode=table.mode
    )
    fore_br = best_response_value(
        table.grid, table.horizon, table.order, rain, FORECASTER, mode=table.mode
    )
    return ExploitabilityReport(
        game_value=table.value, rain_br_value=rain_br, fore_br_value=fore_br
    )


# ---------------------------------------------------------------------------
# Brute-force oracle: the full history tree, no aggregation

HISTORY_TREE_NODE_LIMIT = 500_000


def history_tree_value(
    grid: Grid,
    horizon: int,
    order: MoveOrder = MoveOrder.SIMULTANEOUS,
    *,
    mode: str = "exact",
) -> object:
    """Game value computed on raw histories (toy sizes only).

    Strategies may condition on the entire history here; agreement with
    backward induction certifies the count-state aggregation.
    """
    N = grid.n_points
    nodes = sum((2 * N) ** t for t in range(horizon + 1))
    if nodes > HISTORY_TREE_NODE_LIMIT:
        raise ResourceLimitError(
            f"history tree has {nodes} nodes (> {HISTORY_TREE_NODE_LIMIT})"
        )
    exact = mode == "exact"
    comp = [0] * N
    rvec = [0] * N

    def recurse(t: int):
        if t == horizon:
            return terminal_score(tuple(comp), tuple(rvec), N, horizon, exact)
        row0 = []
        row1 = []
        for d in range(N):
            for a in (0, 1):
                comp[d] += 1
                rvec[d] += a
                val = recurse(t + 1)
                comp[d] -= 1
                rvec[d] -= a
                (row1 if a else row0).append(val)
        if order is MoveOrder.SIMULTANEOUS:
            return _two_row_solve(tuple(row0), tuple(row1), exact).value
        return min(max(row0[d], row1[d]) for d in range(N))

    return recurse(0)
