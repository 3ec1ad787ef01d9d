import random
from fractions import Fraction as F

import pytest

from caliblab import (
    MatrixGame,
    minimax_equals_maximin_check,
    solve_matrix_game,
    support_enumeration_solve,
)


def _assert_exact_solution(game, sol):
    assert sum(sol.row_mix) == 1 and all(w >= 0 for w in sol.row_mix)
    assert sum(sol.col_mix) == 1 and all(w >= 0 for w in sol.col_mix)
    lo, hi = sol.guarantees(game)
    # no pure deviation is profitable for either player
    assert lo == sol.value == hi


def test_matching_pennies():
    game = MatrixGame.of([[1, -1], [-1, 1]])
    sol = solve_matrix_game(game)
    assert sol.value == 0
    assert sol.row_mix == (F(1, 2), F(1, 2))
    assert sol.col_mix == (F(1, 2), F(1, 2))
    _assert_exact_solution(game, sol)


def test_two_by_two_closed_form():
    # value (ad - bc) / (a + d - b - c) when fully mixed
    game = MatrixGame.of([[F(3), F(1)], [F(1), F(2)]])
    sol = solve_matrix_game(game)
    assert sol.value == F(5, 3)
    assert sol.row_mix == (F(1, 3), F(2, 3))
    assert sol.col_mix == (F(1, 3), F(2, 3))
    _assert_exact_solution(game, sol)


def test_dominated_column_goes_pure():
    game = MatrixGame.of([[1, 0], [1, 0]])
    sol = solve_matrix_game(game)
    assert sol.value == 0
    assert sol.col_mix == (0, 1)
    _assert_exact_solution(game, sol)


def test_pure_saddle():
    game = MatrixGame.of([[F(2), F(3)], [F(1), F(4)]])
    check = minimax_equals_maximin_check(game)
    assert check.maximin == check.minimax == 2
    assert check.gap == 0 and check.equal


def test_single_row_and_column():
    sol = solve_matrix_game(MatrixGame.of([[F(5), F(2), F(7)]]))
    assert sol.value == 2 and sol.col_mix == (0, 1, 0)
    sol = solve_matrix_game(MatrixGame.of([[F(5)], [F(2)], [F(7)]]))
    assert sol.value == 7 and sol.row_mix == (0, 0, 1)


def _random_game(rng, rows, cols):
    return MatrixGame.of(
        [
            [F(rng.randint(-8, 8), rng.randint(1, 8)) for _ in range(cols)]
            for _ in range(rows)
        ]
    )


def test_two_row_solver_agrees_with_support_enumeration():
    rng = random.Random(1234)
    for _ in range(200):
        cols = rng.randint(1, 8)
        game = _random_game(rng, 2, cols)
        sol = solve_matrix_game(game)
        oracle = support_enumeration_solve(game)
        assert sol.value == oracle.value
        assert sol.gap == 0
        _assert_exact_solution(game, sol)
        _assert_exact_solution(game, oracle)


def test_two_column_games_by_transposition():
    rng = random.Random(99)
    for _ in range(100):
        rows = rng.randint(1, 6)
        game = _random_game(rng, rows, 2)
        sol = solve_matrix_game(game)
        oracle = support_enumeration_solve(game)
        assert sol.value == oracle.value
        _assert_exact_solution(game, sol)


def test_minimax_check_random_games():
    rng = random.Random(7)
    for _ in range(100):
        game = _random_game(rng, 2, rng.randint(1, 8))
        check = minimax_equals_maximin_check(game)
        assert check.gap == 0


def test_iterative_fallback_certifies_gap():
    # rock-paper-scissors has value 0 and needs the general path (3x3)
    game = MatrixGame.of([[0, -1, 1], [1, 0, -1], [-1, 1, 0]])
    sol = solve_matrix_game(game, tol=1e-6)
    assert sol.gap <= 1e-6
    assert abs(sol.value) <= 1e-6
    lo, hi = sol.guarantees(game)
    assert hi - lo <= sol.gap + 1e-15
    exact = support_enumeration_solve(
        MatrixGame.of([[F(v) for v in row] for row in game.payoff])
    )
    assert exact.value == 0
    assert abs(sol.value - float(exact.value)) <= sol.gap


def test_invalid_matrices_rejected():
    with pytest.raises(ValueError):
        MatrixGame.of([])
    with pytest.raises(ValueError):
        MatrixGame.of([[1, 2], [3]])
