import csv
import json
import math
from dataclasses import replace
from fractions import Fraction as F

import numpy as np
import pytest

from caliblab import (
    BestResponse,
    ConfigurationError,
    ConstantForecast,
    ExperimentConfig,
    GapChaser,
    IID,
    MoveOrder,
    PlaybackProb,
    RevealedUniform,
    run_experiment,
    sweep,
)
from caliblab.harness import (
    fast_path_eligible,
    ols_slope,
    worker_count,
    write_per_rep_csv,
    write_sweep_csv,
)
from caliblab.seeding import uniform_matrix


def _config(**kw):
    base = dict(
        n_points=2,
        horizon=20,
        rainmaker=RevealedUniform(),
        forecaster=BestResponse(),
        replications=50,
        master_seed=9000,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_exhaustive_fair_coin_constant_forecast():
    config = _config(
        n_points=1,
        horizon=2,
        rainmaker=IID(p=F(1, 2)),
        forecaster=ConstantForecast(point=F(1, 2)),
        replications=1,
        mode="exhaustive",
    )
    stats = run_experiment(config)
    assert stats.exact["mean_k"] == F(1, 4)
    assert stats.mean_k == 0.25
    assert stats.se_k == 0.0


def test_exhaustive_matches_monte_carlo():
    exact = run_experiment(
        _config(
            n_points=1,
            horizon=2,
            rainmaker=IID(p=F(1, 2)),
            forecaster=ConstantForecast(point=F(1, 2)),
            replications=1,
            mode="exhaustive",
        )
    )
    sampled = run_experiment(
        _config(
            n_points=1,
            horizon=2,
            rainmaker=IID(p=F(1, 2)),
            forecaster=ConstantForecast(point=F(1, 2)),
            replications=4000,
        )
    )
    assert abs(sampled.mean_k - float(exact.exact["mean_k"])) <= 3 * sampled.se_k


def test_exhaustive_gap_chaser_has_zero_smoothed_score():
    stats = run_experiment(
        _config(
            n_points=2,
            horizon=4,
            rainmaker=GapChaser(),
            forecaster=BestResponse(),
            replications=1,
            mode="exhaustive",
        )
    )
    assert stats.exact["mean_k_tilde"] == 0


def test_exhaustive_rejects_continuous_rainmaker():
    with pytest.raises(ConfigurationError, match="finitely supported"):
        run_experiment(_config(mode="exhaustive", replications=1))


def test_exhaustive_rejects_large_cases():
    with pytest.raises(ConfigurationError):
        run_experiment(
            _config(
                horizon=13,
                rainmaker=IID(p=F(1, 2)),
                forecaster=ConstantForecast(point=F(1, 4)),
                replications=1,
                mode="exhaustive",
            )
        )


def test_rerun_is_bit_identical():
    config = _config()
    first = run_experiment(config)
    second = run_experiment(config)
    assert first.mean_k == second.mean_k
    assert np.array_equal(first.per_rep_k, second.per_rep_k)
    assert first.to_json_dict() == second.to_json_dict()


def test_replication_streams_are_distinct():
    mats = [uniform_matrix(5, rep, 8) for rep in range(6)]
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            assert not np.array_equal(mats[i], mats[j])


def test_fast_path_matches_sequential():
    config = _config(n_points=3, horizon=97, replications=25)
    assert fast_path_eligible(config)
    fast = run_experiment(replace(config, use_fast_path=True))
    slow = run_experiment(replace(config, use_fast_path=False))
    assert np.array_equal(fast.per_rep_k, slow.per_rep_k)
    assert np.array_equal(fast.per_rep_ksq, slow.per_rep_ksq)
    assert np.array_equal(fast.per_rep_k_tilde, slow.per_rep_k_tilde)
    assert fast.usage == slow.usage
    assert [(r.ratio, r.se, r.flagged) for r in fast.ratios] == [
        (r.ratio, r.se, r.flagged) for r in slow.ratios
    ]


def test_fast_path_eligibility_rules():
    assert not fast_path_eligible(_config(mode="exact"))
    assert not fast_path_eligible(_config(order=MoveOrder.FORECAST_FIRST))
    assert not fast_path_eligible(_config(rainmaker=GapChaser()))
    # a probability with no exact double representation stays sequential
    assert not fast_path_eligible(_config(rainmaker=IID(p=F(1, 3))))
    assert fast_path_eligible(_config(rainmaker=IID(p=F(1, 2))))
    assert fast_path_eligible(
        _config(rainmaker=PlaybackProb(probs=(0.25, 0.5) * 10))
    )
    with pytest.raises(ConfigurationError):
        run_experiment(_config(rainmaker=GapChaser(), use_fast_path=True))


def test_playback_fast_path_matches_sequential():
    probs = tuple(F(i % 11, 16) for i in range(40))
    config = _config(rainmaker=PlaybackProb(probs=probs), horizon=40, replications=20)
    assert fast_path_eligible(config)
    fast = run_experiment(replace(config, use_fast_path=True))
    slow = run_experiment(replace(config, use_fast_path=False))
    assert np.array_equal(fast.per_rep_k, slow.per_rep_k)


def test_score_moment_invariants_hold_per_replication():
    stats = run_experiment(_config(replications=200))
    assert stats.mean_ksq <= stats.mean_k + 1e-15
    assert np.all(stats.per_rep_k**2 <= stats.per_rep_ksq + 1e-12)
    assert np.all(stats.per_rep_ksq <= stats.per_rep_k + 1e-12)


def test_uniform_rainmaker_uses_every_point_evenly():
    stats = run_experiment(_config(n_points=5, horizon=2000, replications=40))
    for freq in stats.usage:
        assert freq == pytest.approx(1 / 5, rel=0.1)


def test_worker_env_cap(monkeypatch):
    monkeypatch.setenv("CALIB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CALIB_THREADS", "0")
    with pytest.raises(ConfigurationError):
        worker_count()
    monkeypatch.setenv("CALIB_THREADS", "lots")
    with pytest.raises(ConfigurationError):
        worker_count()
    monkeypatch.delenv("CALIB_THREADS")
    assert worker_count() == 1


def test_threaded_replications_match_single_thread():
    config = _config(replications=30, use_fast_path=False)
    single = run_experiment(replace(config, workers=1))
    pooled = run_experiment(replace(config, workers=4))
    assert np.array_equal(single.per_rep_k, pooled.per_rep_k)


def test_summary_and_per_rep_outputs(tmp_path):
    summary = tmp_path / "summary.json"
    per_rep = tmp_path / "scores.csv"
    config = _config(
        replications=12, summary_path=str(summary), per_rep_path=str(per_rep)
    )
    stats = run_experiment(config)
    data = json.loads(summary.read_text())
    assert data["mean_k"] == stats.mean_k
    assert data["bound"]["bounds"]["main"]["threshold"] == 8
    with open(per_rep) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert float(rows[3]["k"]) == stats.per_rep_k[3]


def test_per_rep_csv_rejected_for_exhaustive(tmp_path):
    stats = run_experiment(
        _config(
            n_points=1, horizon=2, rainmaker=IID(p=F(1, 2)),
            forecaster=ConstantForecast(point=F(1, 2)),
            replications=1, mode="exhaustive",
        )
    )
    with pytest.raises(ConfigurationError):
        write_per_rep_csv(stats, str(tmp_path / "x.csv"))


def test_ols_slope_recovers_a_line():
    xs = [1.0, 2.0, 3.0, 4.0]
    ys = [2.0 - 0.5 * x for x in xs]
    slope, stderr = ols_slope(xs, ys)
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        ols_slope([1.0, 2.0], [1.0, 2.0])


def test_sweep_requires_horizons():
    with pytest.raises(ConfigurationError):
        sweep(_config(), [])


def test_sweep_rows_and_fit(tmp_path):
    base = _config(replications=120)
    result = sweep(base, [16, 64, 256])
    assert [row.horizon for row in result.rows] == [16, 64, 256]
    (fit,) = result.fits
    assert fit.metric == "k_tilde"
    assert fit.points == 3
    # smoothed score decays like T^(-1/2); generous Monte Carlo band
    assert -0.8 <= fit.slope <= -0.2
    path = tmp_path / "rows.csv"
    write_sweep_csv(result, str(path))
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["T"]) for r in rows] == [16, 64, 256]
    assert all(r["main_threshold"] == "8" for r in rows)


def test_sweep_two_points_emits_rows_without_fit():
    result = sweep(_config(replications=30), [8, 16])
    assert len(result.rows) == 2
    assert result.fits == ()


def test_sweep_over_grids():
    result = sweep(_config(replications=30), [8, 16], grids=[1, 2])
    assert [(r.n_points, r.horizon) for r in result.rows] == [
        (1, 8), (1, 16), (2, 8), (2, 16),
    ]


def test_invalid_configs_rejected():
    with pytest.raises(ConfigurationError):
        run_experiment(_config(replications=0))
    with pytest.raises(ConfigurationError):
        run_experiment(_config(mode="bogus"))
