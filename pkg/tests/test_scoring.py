import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from caliblab import (
    Step,
    Transcript,
    TranscriptError,
    make_grid,
    read_transcript_csv,
    round_to_grid,
    score_report,
    write_transcript_csv,
)


def test_make_grid_examples():
    assert make_grid(1).points == (F(1, 2),)
    assert make_grid(2).points == (F(1, 4), F(3, 4))
    assert make_grid(3).points == (F(1, 6), F(1, 2), F(5, 6))


def test_make_grid_rejects_zero():
    with pytest.raises(ValueError):
        make_grid(0)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 12])
def test_grid_structure(n):
    grid = make_grid(n)
    pts = grid.points
    assert all(0 < p < 1 for p in pts)
    assert all(b - a == F(1, n) for a, b in zip(pts, pts[1:]))
    # every point of a fine lattice is within 1/(2N) of some grid point
    for i in range(101):
        x = F(i, 100)
        assert min(abs(x - p) for p in pts) <= F(1, 2 * n)


def test_round_examples():
    assert round_to_grid(F(7, 10), make_grid(5)) == F(7, 10)
    assert round_to_grid(F(1, 2), make_grid(2)) == F(1, 4)  # midpoint tie, down
    assert round_to_grid(0.0, make_grid(2)) == F(1, 4)
    assert round_to_grid(1.0, make_grid(2)) == F(3, 4)


def test_round_rejects_outside_unit_interval():
    grid = make_grid(3)
    with pytest.raises(ValueError):
        round_to_grid(-0.001, grid)
    with pytest.raises(ValueError):
        round_to_grid(F(11, 10), grid)


@given(
    n=st.integers(min_value=1, max_value=12),
    num=st.integers(min_value=0, max_value=10_000),
)
def test_round_distance_and_idempotence(n, num):
    grid = make_grid(n)
    p = F(num, 10_000)
    d = round_to_grid(p, grid)
    assert abs(d - p) <= F(1, 2 * n)
    assert round_to_grid(d, grid) == d


@given(
    n=st.integers(min_value=1, max_value=12),
    a=st.integers(min_value=0, max_value=5000),
    b=st.integers(min_value=0, max_value=5000),
)
def test_round_monotone(n, a, b):
    grid = make_grid(n)
    lo, hi = sorted((F(a, 5000), F(b, 5000)))
    assert round_to_grid(lo, grid) <= round_to_grid(hi, grid)


def test_score_example_two_points():
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 4)), Step(0, F(3, 4))))
    report = score_report(t, grid)
    assert report.k_score == F(3, 4)
    assert report.k_sq_score == F(9, 16)
    assert report.point_score(F(1, 4)).gap == F(3, 4)
    assert report.point_score(F(3, 4)).gap == F(-3, 4)


def test_score_perfectly_calibrated():
    grid = make_grid(1)
    t = Transcript(steps=tuple(Step(w, F(1, 2)) for w in (1, 0, 1, 0)))
    report = score_report(t, grid)
    assert report.point_score(F(1, 2)).abar == F(1, 2)
    assert report.k_score == 0


def test_score_smoothed_example():
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 4), prob=F(3, 10)),))
    report = score_report(t, grid)
    assert report.point_score(F(1, 4)).gap == F(3, 4)
    assert report.point_score(F(1, 4)).smoothed_gap == F(7, 10)
    assert abs(report.k_score - report.k_tilde) == F(1, 20)
    assert abs(report.k_score - report.k_tilde) <= F(1, 4)


def test_unused_point_has_no_frequency():
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 4)),))
    report = score_report(t, grid)
    unused = report.point_score(F(3, 4))
    assert unused.n == 0
    assert unused.abar is None
    assert unused.gap == 0


def test_off_grid_forecast_rejected():
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 3)),))
    with pytest.raises(TranscriptError, match="period 1"):
        score_report(t, grid)
    with pytest.raises(TranscriptError):
        t.validate_on_grid(grid)


def _random_transcript(rng, n, horizon, with_probs, rounded):
    grid = make_grid(n)
    steps = []
    for _ in range(horizon):
        p = None
        if with_probs:
            p = F(rng.randint(0, 1000), 1000)
        if rounded:
            c = round_to_grid(p, grid)
        else:
            c = grid.points[rng.randrange(n)]
        a = rng.randint(0, 1) if p is None else int(rng.random() < p)
        steps.append(Step(weather=a, forecast=c, prob=p))
    return grid, Transcript(steps=tuple(steps))


@pytest.mark.parametrize("rounded", [False, True])
def test_score_identities_random(rounded):
    rng = random.Random(20_260_810 + rounded)
    for _ in range(300):
        n = rng.randint(1, 12)
        horizon = rng.randint(1, 60)
        grid, t = _random_transcript(rng, n, horizon, with_probs=True, rounded=rounded)
        report = score_report(t, grid)
        assert sum(ps.n for ps in report.per_point) == horizon
        total_gap = sum(abs(ps.gap) for ps in report.per_point)
        assert report.k_score == F(total_gap, 1) / horizon
        assert 0 <= report.k_score <= 1
        assert report.k_score**2 <= report.k_sq_score <= report.k_score
        if rounded:
            for ps in report.per_point:
                assert abs(ps.gap - ps.smoothed_gap) <= F(ps.n, 2 * n)
            assert abs(report.k_score - report.k_tilde) <= F(1, 2 * n)


def test_float_mode_tracks_exact():
    rng = random.Random(7)
    grid, t = _random_transcript(rng, 5, 80, with_probs=True, rounded=True)
    exact = score_report(t, grid)
    approx = score_report(t, grid, mode="float")
    assert abs(float(exact.k_score) - approx.k_score) < 1e-12
    assert abs(float(exact.k_sq_score) - approx.k_sq_score) < 1e-12
    assert abs(float(exact.k_tilde) - approx.k_tilde) < 1e-12


def test_csv_round_trip(tmp_path):
    rng = random.Random(11)
    grid, t = _random_transcript(rng, 3, 25, with_probs=True, rounded=False)
    path = tmp_path / "transcript.csv"
    write_transcript_csv(t, path)
    back = read_transcript_csv(path)
    assert back.horizon == t.horizon
    assert [s.weather for s in back.steps] == [s.weather for s in t.steps]
    assert [s.forecast for s in back.steps] == [s.forecast for s in t.steps]
    assert [F(s.prob) for s in back.steps] == [F(s.prob) for s in t.steps]
    assert score_report(back, grid).k_score == score_report(t, grid).k_score


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(TranscriptError):
        read_transcript_csv(path)


def test_csv_bad_row_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,a,c,p\n1,1,1/4,\n2,bogus,3/4,\n")
    with pytest.raises(TranscriptError, match="line 3"):
        read_transcript_csv(path)


def test_report_json_shape():
    grid = make_grid(2)
    t = Transcript(steps=(Step(1, F(1, 4), prob=F(1, 4)),))
    data = score_report(t, grid).to_json_dict()
    assert data["k_score"]["rational"] == "3/4"
    assert data["k_score"]["decimal"] == 0.75
    assert data["per_point"][0]["d"]["rational"] == "1/4"
    assert data["per_point"][1]["abar"] is None
