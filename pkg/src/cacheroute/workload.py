"""Request workload generation.

Independent-reference-model demand: each user issues requests according to a
Poisson process over a Zipf-like catalog of unit-size files.  The module also
implements the random popularity-drift process used by the drifting-demand
experiments, plus a buffered sampler that the event loop uses to draw the same
stream cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Popularity vectors must stay normalized to this tolerance at all times,
# including after arbitrary drift sequences.
POPULARITY_SUM_TOL = 1e-12


def zipf_popularity(file_count: int, skew: float = 0.8) -> np.ndarray:
    """Zipf-like popularity vector ``q_j ~ j**(-skew)`` over ranks 1..file_count.

    Parameters
    ----------
    file_count : int
        Catalog size (must be >= 1).
    skew : float
        Nonnegative skewness parameter; 0 gives the uniform vector.

    Returns
    -------
    numpy.ndarray
        Probabilities summing to 1, nonincreasing in rank.
    """
    if file_count < 1:
        raise ValueError("file_count must be >= 1")
    if skew < 0:
        raise ValueError("skew must be nonnegative")
    ranks = np.arange(1, file_count + 1, dtype=float)
    weights = ranks ** (-skew)
    return weights / weights.sum()


@dataclass(frozen=True)
class Catalog:
    """Set of unit-size files identified by the contiguous ids 1..file_count."""

    file_count: int

    def __post_init__(self):
        if self.file_count < 1:
            raise ValueError("catalog needs at least one file")

    def file_ids(self) -> range:
        return range(1, self.file_count + 1)


@dataclass
class UserProfile:
    """One user's Poisson demand: total request rate and per-file popularity."""

    user_id: int
    rate: float
    popularity: np.ndarray

    def validate(self) -> None:
        if self.rate <= 0:
            raise ValueError(f"user {self.user_id}: rate must be positive")
        q = self.popularity
        if np.any(q < 0) or np.any(q > 1):
            raise ValueError(f"user {self.user_id}: popularities must lie in [0, 1]")
        if abs(float(q.sum()) - 1.0) > POPULARITY_SUM_TOL:
            raise ValueError(f"user {self.user_id}: popularity must sum to 1")


@dataclass(frozen=True)
class DriftConfig:
    """Per-arrival popularity perturbation settings."""

    enabled: bool = False
    per_arrival_change_probability: float = 0.01

    def __post_init__(self):
        p = self.per_arrival_change_probability
        if not 0.0 <= p <= 1.0:
            raise ValueError("change probability must lie in [0, 1]")


@dataclass(frozen=True)
class DriftEvent:
    """Report of one drift step; ``changed`` is False for the no-op branch."""

    changed: bool
    user_index: int = -1
    file_id: int = 0
    old_value: float = 0.0
    new_value: float = 0.0


def next_request(rng: np.random.Generator, profiles, now: float = 0.0):
    """Draw the next request of the superposed per-user Poisson stream.

    Returns ``(arrival_time, user_id, file_id)`` where the interarrival time is
    Exponential(sum of user rates), the user is picked proportionally to their
    rate and the file according to that user's popularity vector.  Successive
    calls with increasing ``now`` therefore form the superposed stream.  This
    is the reference implementation; :class:`RequestSampler` produces the same
    law with per-block buffering for the simulation loop.
    """
    if not profiles:
        raise ValueError("at least one user profile is required")
    rates = np.array([p.rate for p in profiles], dtype=float)
    total = float(rates.sum())
    dt = rng.exponential(1.0 / total)
    user_cdf = np.cumsum(rates) / total
    u = int(np.searchsorted(user_cdf, rng.random(), side="right"))
    u = min(u, len(profiles) - 1)
    file_cdf = np.cumsum(profiles[u].popularity)
    f = int(np.searchsorted(file_cdf, rng.random() * file_cdf[-1], side="right")) + 1
    f = min(f, profiles[u].popularity.size)
    return now + dt, profiles[u].user_id, f


def _drift_once(rng: np.random.Generator, profiles) -> DriftEvent:
    """Perturb one uniformly chosen (user, file) popularity entry.

    The raw update is ``q <- min(1, max(0, q + delta))`` with
    ``delta ~ Uniform[-q, q]``; the user's vector is then renormalized so it
    remains a sampling distribution (the clamp alone would break the unit sum).
    """
    u = int(rng.integers(0, len(profiles)))
    q = profiles[u].popularity
    f = int(rng.integers(1, q.size + 1))
    old = float(q[f - 1])
    delta = float(rng.uniform(-old, old)) if old > 0 else 0.0
    q[f - 1] = min(1.0, max(0.0, old + delta))
    q /= q.sum()
    return DriftEvent(True, u, f, old, float(q[f - 1]))


def apply_drift(rng: np.random.Generator, profiles, cfg: DriftConfig) -> DriftEvent:
    """With the configured probability, perturb one popularity entry in place."""
    if not cfg.enabled:
        raise ValueError("drift is disabled in this configuration")
    if rng.random() >= cfg.per_arrival_change_probability:
        return DriftEvent(False)
    return _drift_once(rng, profiles)


class DriftProcess:
    """Buffered per-arrival drift driver; same law as repeated apply_drift.

    Coins are pre-drawn in blocks from the dedicated drift stream, so the cost
    of the (rare) event check stays negligible inside the event loop.
    """

    def __init__(self, rng, profiles, cfg: DriftConfig, block: int = 8192):
        self._rng = rng
        self._profiles = profiles
        self._prob = cfg.per_arrival_change_probability
        self._block = block
        self._coins = rng.random(block).tolist()
        self._i = 0

    def step(self) -> DriftEvent:
        i = self._i
        if i >= self._block:
            self._coins = self._rng.random(self._block).tolist()
            i = 0
        self._i = i + 1
        if self._coins[i] >= self._prob:
            return DriftEvent(False)
        return _drift_once(self._rng, self._profiles)


class RequestSampler:
    """Buffered superposed-Poisson sampler used by the event loop.

    Draws are pre-generated in blocks from a single workload stream:
    interarrival exponentials, user-selection uniforms, and per-user file ids.
    A user's file buffer must be invalidated whenever drift changes their
    popularity vector.
    """

    def __init__(self, profiles, rng, block: int = 8192, file_block: int = 2048):
        if not profiles:
            raise ValueError("at least one user profile is required")
        self._rng = rng
        self._profiles = profiles
        self._block = block
        self._file_block = file_block
        rates = np.array([p.rate for p in profiles], dtype=float)
        self.total_rate = float(rates.sum())
        self._scale = 1.0 / self.total_rate
        self._user_cdf = (np.cumsum(rates) / self.total_rate).tolist()
        self._n_users = len(profiles)
        self._file_cdf = [np.cumsum(p.popularity) for p in profiles]
        self._gaps: list[float] = []
        self._users: list[int] = []
        self._i = block  # force refill on first draw
        self._file_buf: list[list[int]] = [[] for _ in profiles]
        self._file_i = [0] * self._n_users

    def _refill(self) -> None:
        rng = self._rng
        self._gaps = rng.exponential(self._scale, self._block).tolist()
        self._users = np.searchsorted(
            self._user_cdf, rng.random(self._block), side="right"
        ).tolist()
        self._i = 0

    def _refill_files(self, u: int) -> None:
        cdf = self._file_cdf[u]
        draws = self._rng.random(self._file_block) * cdf[-1]
        self._file_buf[u] = (np.searchsorted(cdf, draws, side="right") + 1).tolist()
        self._file_i[u] = 0

    def invalidate(self, user_index: int) -> None:
        """Discard the buffered file draws of a user whose popularity changed."""
        self._file_cdf[user_index] = np.cumsum(self._profiles[user_index].popularity)
        self._file_buf[user_index] = []
        self._file_i[user_index] = 0

    def next(self):
        """Return ``(interarrival_gap, user_index, file_id)``."""
        i = self._i
        if i >= self._block:
            self._refill()
            i = 0
        self._i = i + 1
        gap = self._gaps[i]
        u = self._users[i]
        if u >= self._n_users:  # guard against cdf rounding at 1.0
            u = self._n_users - 1
        fi = self._file_i[u]
        buf = self._file_buf[u]
        if fi >= len(buf):
            self._refill_files(u)
            buf = self._file_buf[u]
            fi = 0
        self._file_i[u] = fi + 1
        return gap, u, buf[fi]
