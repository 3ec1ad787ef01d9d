"""caliblab: a laboratory for the finite calibration game.

Exact scoring of forecast transcripts, best-response and adversarial
strategies, exact minimax values by backward induction over count states,
closed-form guarantee calculators, and a reproducible Monte Carlo harness.
"""

from .bounds import (
    BoundReport,
    PointRatio,
    bound_report,
    f_of_d,
    sum_f,
    variance_bound_check,
)
from .errors import (
    ConfigurationError,
    HorizonError,
    ResourceLimitError,
    StrategyError,
    TranscriptError,
)
from .harness import ExperimentConfig, SummaryStats, run_experiment, sweep
from .induction import (
    ValueTable,
    backward_induction,
    best_response_value,
    enumerate_states,
    exploitability,
    history_tree_value,
)
from .markov import CountState, MarkovTable, MoveOrder
from .matrixgame import (
    GameSolution,
    MatrixGame,
    minimax_equals_maximin_check,
    solve_matrix_game,
    support_enumeration_solve,
)
from .scoring import (
    Grid,
    ScoreReport,
    Step,
    Transcript,
    make_grid,
    read_transcript_csv,
    round_to_grid,
    score_report,
    write_transcript_csv,
)
from .strategies import (
    BestResponse,
    ConstantForecast,
    CounterForecast,
    EpisodeResult,
    GapChaser,
    IID,
    MarkovForecaster,
    PlaybackProb,
    RevealedUniform,
    best_response_forecast,
    play_episode,
    rainmaker_prob,
)

__version__ = "0.1.0"

__all__ = [
    "BestResponse",
    "BoundReport",
    "ConfigurationError",
    "ConstantForecast",
    "CountState",
    "CounterForecast",
    "EpisodeResult",
    "ExperimentConfig",
    "GameSolution",
    "GapChaser",
    "Grid",
    "HorizonError",
    "IID",
    "MarkovForecaster",
    "MarkovTable",
    "MatrixGame",
    "MoveOrder",
    "PlaybackProb",
    "PointRatio",
    "ResourceLimitError",
    "RevealedUniform",
    "ScoreReport",
    "Step",
    "StrategyError",
    "SummaryStats",
    "Transcript",
    "TranscriptError",
    "ValueTable",
    "backward_induction",
    "best_response_forecast",
    "best_response_value",
    "bound_report",
    "enumerate_states",
    "exploitability",
    "f_of_d",
    "history_tree_value",
    "make_grid",
    "minimax_equals_maximin_check",
    "play_episode",
    "rainmaker_prob",
    "read_transcript_csv",
    "round_to_grid",
    "run_experiment",
    "score_report",
    "solve_matrix_game",
    "sum_f",
    "support_enumeration_solve",
    "sweep",
    "variance_bound_check",
    "write_transcript_csv",
]
