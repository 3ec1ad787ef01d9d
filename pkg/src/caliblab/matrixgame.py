"""Finite zero-sum matrix games: exact values and certifying mixed strategies.

The row player maximizes, the column player minimizes.  Games with two rows
(or two columns, by transposition) are solved exactly over the rationals with
the two-line envelope method: the row guarantee phi(x) = min_j g_j(x) is
piecewise linear and concave in the row mix, so its maximum sits at x in
{0, 1} or at a crossing of two column lines; the optimal column mix comes from
equalizing two active columns of opposite slope.  Larger games fall back to
regret-matching self play with exact best-response bounds certifying the gap.

A separate support-enumeration solver (square subgames, exact linear algebra)
exists as an independent oracle for cross-checking.
"""

from __future__ import annotations

import itertools
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

try:  # GMP-backed rationals keep deep value recursions tractable
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover
    _mpq = None


def exact_number(v):
    """Coerce to the fastest available exact rational type."""
    if _mpq is not None:
        return _mpq(v)
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class MatrixGame:
    """An m x n payoff array; entry [i][j] is paid to the maximizing row player."""

    payoff: tuple[tuple, ...]

    def __post_init__(self):
        if len(self.payoff) == 0 or len(self.payoff[0]) == 0:
            raise ValueError("payoff matrix must be nonempty")
        width = len(self.payoff[0])
        if any(len(row) != width for row in self.payoff):
            raise ValueError("ragged payoff matrix")

    @property
    def rows(self) -> int:
        return len(self.payoff)

    @property
    def cols(self) -> int:
        return len(self.payoff[0])

    @classmethod
    def of(cls, rows: Sequence[Sequence]) -> "MatrixGame":
        return cls(payoff=tuple(tuple(row) for row in rows))

    def transpose_negate(self) -> "MatrixGame":
        """The game seen by the column player as a maximizer."""
        m, n = self.rows, self.cols
        return MatrixGame(
            payoff=tuple(tuple(-self.payoff[i][j] for i in range(m)) for j in range(n))
        )

    def row_payoff(self, i: int, col_mix: Sequence) -> object:
        return sum(w * self.payoff[i][j] for j, w in enumerate(col_mix))

    def col_payoff(self, j: int, row_mix: Sequence) -> object:
        return sum(w * self.payoff[i][j] for i, w in enumerate(row_mix))


@dataclass(frozen=True)
class GameSolution:
    """Value plus certifying mixes; ``gap`` is 0 when the solve was exact."""

    value: object
    row_mix: tuple
    col_mix: tuple
    gap: object = 0

    def guarantees(self, game: MatrixGame) -> tuple:
        """(row guarantee, column guarantee): min_j U(x, j) and max_i U(i, y).
        At an exact solution both equal the value."""
        lo = min(game.col_payoff(j, self.row_mix) for j in range(game.cols))
        hi = max(game.row_payoff(i, self.col_mix) for i in range(game.rows))
        return lo, hi


def _two_row_solve(row0: Sequence, row1: Sequence, exact: bool) -> GameSolution:
    """Envelope method on a 2 x n game; exact=True keeps Fractions throughout."""
    n = len(row0)
    if exact:
        row0 = tuple(exact_number(v) for v in row0)
        row1 = tuple(exact_number(v) for v in row1)
    one = exact_number(1) if exact else 1.0
    zero = one - one
    atol = zero if exact else 1e-12 * max(1.0, max(abs(v) for v in tuple(row0) + tuple(row1)))

    slopes = [row0[j] - row1[j] for j in range(n)]

    def g(j, x):
        return row1[j] + x * slopes[j]

    def phi(x):
        return min(g(j, x) for j in range(n))

    candidates = {zero, one}
    for j in range(n):
        for k in range(j + 1, n):
            d = slopes[j] - slopes[k]
            if d == 0:
                continue
            x = (row1[k] - row1[j]) / d
            if zero <= x <= one:
                candidates.add(x)

    best_x = None
    best_v = None
    for x in sorted(candidates):
        v = phi(x)
        if best_v is None or v > best_v:
            best_v, best_x = v, x

    v, x = best_v, best_x
    active = [j for j in range(n) if g(j, x) <= v + atol]

    col_mix = _two_row_col_mix(n, slopes, active, x, one, zero, atol)
    return GameSolution(value=v, row_mix=(x, one - x), col_mix=col_mix)


def _two_row_col_mix(n, slopes, active, x, one, zero, atol):
    """Certifying column mix for the 2 x n envelope solution.

    A flat active column is optimal pure; at a boundary maximizer an active
    column sloping away from the boundary is pure-optimal; otherwise two
    active columns of opposite slope are mixed to equalize the rows.
    """

    def pure(j):
        return tuple(one if i == j else zero for i in range(n))

    for j in active:
        if abs(slopes[j]) <= atol:
            return pure(j)
    if x >= one - atol:
        for j in active:
            if slopes[j] > 0:
                return pure(j)
    if x <= zero + atol:
        for j in active:
            if slopes[j] < 0:
                return pure(j)
    pos = [j for j in active if slopes[j] > 0]
    neg = [j for j in active if slopes[j] < 0]
    if not pos or not neg:
        raise ArithmeticError("degenerate envelope: no certifying column pair")
    jp, jn = pos[0], neg[0]
    lam = -slopes[jn] / (slopes[jp] - slopes[jn])
    mix = [zero] * n
    mix[jp] = lam
    mix[jn] = one - lam
    return tuple(mix)


def _is_exact(game: MatrixGame) -> bool:
    return all(
        isinstance(v, (Fraction, int)) for row in game.payoff for v in row
    )


def solve_matrix_game(
    game: MatrixGame,
    *,
    tol: float = 1e-9,
    max_iterations: int = 200_000,
) -> GameSolution:
    """Value and certifying mixes.

    Exact (gap 0) whenever either player has at most two pure strategies and
    the entries are rationals; otherwise iterative with a certified gap
    (``tol`` is the target, the returned ``gap`` is the achieved bound).
    """
    m, n = game.rows, game.cols
    exact = _is_exact(game)

    if m == 1:
        j = min(range(n), key=lambda j: game.payoff[0][j])
        v = game.payoff[0][j]
        one = Fraction(1) if exact else 1.0
        zero = one - one
        return GameSolution(
            value=v,
            row_mix=(one,),
            col_mix=tuple(one if jj == j else zero for jj in range(n)),
        )
    if n == 1:
        i = max(range(m), key=lambda i: game.payoff[i][0])
        v = game.payoff[i][0]
        one = Fraction(1) if exact else 1.0
        zero = one - one
        return GameSolution(
            value=v,
            row_mix=tuple(one if ii == i else zero for ii in range(m)),
            col_mix=(one,),
        )
    if m == 2:
        sol = _two_row_solve(game.payoff[0], game.payoff[1], exact)
        return _publish(sol) if exact else sol
    if n == 2:
        dual = solve_matrix_game(game.transpose_negate(), tol=tol)
        return GameSolution(
            value=-dual.value,
            row_mix=dual.col_mix,
            col_mix=dual.row_mix,
            gap=dual.gap,
        )
    return _iterative_solve(game, tol=tol, max_iterations=max_iterations)


def _publish(sol: GameSolution) -> GameSolution:
    """Normalize internal exact rationals to Fractions at the API boundary."""

    def conv(x):
        if isinstance(x, Fraction):
            return x
        return Fraction(int(x.numerator), int(x.denominator))

    return GameSolution(
        value=conv(sol.value),
        row_mix=tuple(conv(w) for w in sol.row_mix),
        col_mix=tuple(conv(w) for w in sol.col_mix),
        gap=sol.gap,
    )


def _iterative_solve(game: MatrixGame, tol: float, max_iterations: int) -> GameSolution:
    """Regret-matching self play; bounds come from exact best responses to the
    average mixes, so the reported gap is a true certificate."""
    m, n = game.rows, game.cols
    A = np.array([[float(v) for v in row] for row in game.payoff])
    row_regret = np.zeros(m)
    col_regret = np.zeros(n)
    row_sum = np.zeros(m)
    col_sum = np.zeros(n)

    def mix(regret, size):
        pos = np.maximum(regret, 0.0)
        s = pos.sum()
        return pos / s if s > 0 else np.full(size, 1.0 / size)

    best = None
    for it in range(1, max_iterations + 1):
        x = mix(row_regret, m)
        y = mix(col_regret, n)
        row_sum += x
        col_sum += y
        util_rows = A @ y
        util_cols = x @ A
        u = x @ util_rows
        row_regret += util_rows - u
        col_regret += u - util_cols
        if it % 128 == 0 or it == max_iterations:
            xb = row_sum / row_sum.sum()
            yb = col_sum / col_sum.sum()
            lo = float((xb @ A).min())
            hi = float((A @ yb).max())
            if best is None or hi - lo < best[0]:
                best = (hi - lo, lo, hi, xb.copy(), yb.copy())
            if hi - lo <= tol:
                break
    gap, lo, hi, xb, yb = best
    return GameSolution(
        value=(lo + hi) / 2.0,
        row_mix=tuple(xb),
        col_mix=tuple(yb),
        gap=gap,
    )


# ---------------------------------------------------------------------------
# Independent oracle: support enumeration over square subgames


def _solve_linear(A: list[list[Fraction]], b: list[Fraction]) -> Optional[list[Fraction]]:
    """Gaussian elimination over the rationals; None when singular."""
    size = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if M[r][col] != 0), None)
        if pivot is None:
            return None
        M[col], M[pivot] = M[pivot], M[col]
        inv = M[col][col]
        M[col] = [v / inv for v in M[col]]
        for r in range(size):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [v - factor * w for v, w in zip(M[r], M[col])]
    return [M[r][size] for r in range(size)]


def _equalizer(payoff, own: tuple[int, ...], other: tuple[int, ...], by_row: bool):
    """Mix on ``own`` making every index in ``other`` indifferent; returns
    (mix weights aligned with own, value) or None."""
    k = len(own)
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    for idx in other:
        if by_row:
            row = [Fraction(payoff[i][idx]) for i in own]
        else:
            row = [Fraction(payoff[idx][j]) for j in own]
        A.append(row + [Fraction(-1)])
        b.append(Fraction(0))
    A.append([Fraction(1)] * k + [Fraction(0)])
    b.append(Fraction(1))
    sol = _solve_linear(A, b)
    if sol is None:
        return None
    weights, value = sol[:k], sol[k]
    if any(w < 0 for w in weights):
        return None
    return weights, value


def support_enumeration_solve(game: MatrixGame) -> GameSolution:
    """Exact solve by scanning square subgames (the oracle path).

    Every finite zero-sum game has optimal mixes supported on some square
    subgame, so scanning all of them with exact equalization plus full
    certificate checks always terminates with a proof-carrying solution.
    Intended for small games; cost grows combinatorially.
    """
    if not _is_exact(game):
        raise ValueError("support enumeration requires rational entries")
    m, n = game.rows, game.cols
    payoff = game.payoff
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            for cols in itertools.combinations(range(n), k):
                got = _equalizer(payoff, rows, cols, by_row=True)
                if got is None:
                    continue
                x_w, v_row = got
                got = _equalizer(payoff, cols, rows, by_row=False)
                if got is None:
                    continue
                y_w, v_col = got
                if v_row != v_col:
                    continue
                x = [Fraction(0)] * m
                for i, w in zip(rows, x_w):
                    x[i] = w
                y = [Fraction(0)] * n
                for j, w in zip(cols, y_w):
                    y[j] = w
                v = v_row
                if all(game.col_payoff(j, x) >= v for j in range(n)) and all(
                    game.row_payoff(i, y) <= v for i in range(m)
                ):
                    return GameSolution(value=v, row_mix=tuple(x), col_mix=tuple(y))
    raise ArithmeticError("no square subgame certified; should be unreachable")


@dataclass(frozen=True)
class MinimaxCheck:
    maximin: object
    minimax: object
    gap: object

    @property
    def equal(self) -> bool:
        return self.gap == 0


def minimax_equals_maximin_check(game: MatrixGame, *, tol: float = 1e-9) -> MinimaxCheck:
    """Compute both one-sided guarantees and their gap (0 in exact mode).

    maximin = min_j U(x*, j) from the primal solve, minimax = max_i U(i, y*)
    from the dual solve; by the minimax theorem these coincide.
    """
    primal = solve_matrix_game(game, tol=tol)
    maximin = min(game.col_payoff(j, primal.row_mix) for j in range(game.cols))
    minimax = max(game.row_payoff(i, primal.col_mix) for i in range(game.rows))
    return MinimaxCheck(maximin=maximin, minimax=minimax, gap=minimax - maximin)
