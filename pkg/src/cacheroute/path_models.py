"""Models of the uncached (cellular) path.

Two forms are provided for the congestion-sensitive case: the closed-form
M/M/1 mean delay used by optimizers and reports, and an event-driven FIFO
queue used by the simulator to charge per-request sojourn times.  The
congestion-insensitive case is a constant per-user delay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnstableQueueError(RuntimeError):
    """Offered load reached or exceeded the service rate."""


@dataclass(frozen=True)
class DelayProfile:
    """Per-user hit, miss and constant uncached-path delays (time units)."""

    hit_delay: np.ndarray
    miss_delay: np.ndarray
    uncached_delay: np.ndarray

    @classmethod
    def homogeneous(cls, hit: float, miss: float, uncached: float, n_users: int):
        return cls(
            np.full(n_users, float(hit)),
            np.full(n_users, float(miss)),
            np.full(n_users, float(uncached)),
        )

    @property
    def n_users(self) -> int:
        return self.hit_delay.size

    def validate_constant_path(self) -> None:
        """Constant-path runs require d_h < d_0 < d_m for every user."""
        if not (np.all(self.hit_delay < self.uncached_delay)
                and np.all(self.uncached_delay < self.miss_delay)):
            raise ValueError("need hit < uncached < miss delay per user")

    def validate_mm1_path(self, mu: float) -> None:
        """M/M/1 runs assume homogeneous hit/miss delays with d_h < 1/mu < d_m."""
        if np.ptp(self.hit_delay) != 0 or np.ptp(self.miss_delay) != 0:
            raise ValueError("congestion-sensitive runs need homogeneous delays")
        if not (self.hit_delay[0] < 1.0 / mu < self.miss_delay[0]):
            raise ValueError("need hit delay < 1/mu < miss delay")


@dataclass(frozen=True)
class Mm1Config:
    """Service rate of the M/M/1 uncached path."""

    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("service rate must be positive")


def mm1_expected_delay(mu: float, lam: float) -> float:
    """Mean sojourn time 1/(mu - lam) of an M/M/1 queue with arrival rate lam."""
    if lam < 0:
        raise ValueError("arrival rate must be nonnegative")
    if lam >= mu:
        raise UnstableQueueError(f"arrival rate {lam} >= service rate {mu}")
    return 1.0 / (mu - lam)


def constant_path_delay(profile: DelayProfile, user_index: int) -> float:
    """Constant uncached-path delay of one user; independent of traffic."""
    return float(profile.uncached_delay[user_index])


class Mm1Queue:
    """Event-driven single-server FIFO queue with exponential service times.

    Arrivals must be submitted in nondecreasing time order; each submission
    returns the departure time.  Service draws come from the queue's own
    random stream (pre-drawn in blocks).
    """

    __slots__ = ("mu", "_rng", "_services", "_i", "_block",
                 "last_arrival", "last_departure", "busy_time", "jobs")

    def __init__(self, mu: float, rng, block: int = 8192):
        if mu <= 0:
            raise ValueError("service rate must be positive")
        self.mu = mu
        self._rng = rng
        self._block = block
        self._services = rng.exponential(1.0 / mu, block).tolist()
        self._i = 0
        self.last_arrival = -np.inf
        self.last_departure = 0.0
        self.busy_time = 0.0
        self.jobs = 0

    def submit(self, arrival: float) -> float:
        if arrival < self.last_arrival:
            raise ValueError("arrivals must be submitted in time order")
        i = self._i
        if i >= self._block:
            self._services = self._rng.exponential(1.0 / self.mu, self._block).tolist()
            i = 0
        self._i = i + 1
        service = self._services[i]
        start = arrival if arrival > self.last_departure else self.last_departure
        departure = start + service
        self.last_arrival = arrival
        self.last_departure = departure
        self.busy_time += service
        self.jobs += 1
        return departure

    def backlog(self, now: float) -> float:
        """Remaining work in the system, in time units, as seen at ``now``."""
        return max(0.0, self.last_departure - now)


@dataclass(frozen=True)
class Mm1Stats:
    jobs: int
    mean_sojourn: float
    utilization: float


def simulate_mm1(mu: float, lam: float, jobs: int, seed: int) -> Mm1Stats:
    """Drive an M/M/1 queue with Poisson arrivals and report sojourn stats.

    Uses the same FIFO recursion as :class:`Mm1Queue` over pre-drawn arrays,
    which keeps million-job validation runs cheap.
    """
    if lam <= 0:
        raise ValueError("arrival rate must be positive")
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1.0 / lam, jobs)
    services = rng.exponential(1.0 / mu, jobs)
    arrivals = np.cumsum(gaps)
    departure = 0.0
    sojourn_sum = 0.0
    for a, s in zip(arrivals.tolist(), services.tolist()):
        start = a if a > departure else departure
        departure = start + s
        sojourn_sum += departure - a
    horizon = departure
    return Mm1Stats(jobs, sojourn_sum / jobs, float(services.sum()) / horizon)
