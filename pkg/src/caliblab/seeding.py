"""Deterministic randomness for episodes and experiments.

Each (master seed, replication) pair keys an independent counter-based Philox
stream.  An episode reads the stream as a (periods, 3) matrix of uniforms:
row t holds the three per-period slots, consumed positionally so that players
never contend for draws and replications can run in any order.
"""

from __future__ import annotations

import hashlib

import numpy as np

PROB_SLOT = 0      # the rainmaker's own probability draw (RevealedUniform)
WEATHER_SLOT = 1   # realizes a_t = 1[u < p_t]
FORECAST_SLOT = 2  # forecaster randomization (Markov tables)

_MASK64 = (1 << 64) - 1


def replication_key(master_seed: int, replication: int) -> np.ndarray:
    return np.array([master_seed & _MASK64, replication & _MASK64], dtype=np.uint64)


def uniform_matrix(master_seed: int, replication: int, periods: int) -> np.ndarray:
    """The (periods, 3) uniform matrix for one replication."""
    bitgen = np.random.Philox(key=replication_key(master_seed, replication))
    return np.random.Generator(bitgen).random((periods, 3))


def derive_row_seed(master_seed: int, n_points: int, horizon: int) -> int:
    """Stable 64-bit subseed for one sweep row, so rows are independent."""
    blob = f"{master_seed}:{n_points}:{horizon}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")
