"""User-side routing strategies.

Greedy (belief-driven) routing, the plan computed from characteristic-time
hit estimates, the oracle optimal policy, and the two-phase distributed
controller in which the cache learns popularities from the traffic it
observes while users learn the cache state from response delays.  The
perfect-knowledge variant of the controller serves as a benchmark.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .analytic_models import che_solve, optimal_split_p, select_top_files, weighted_popularity


class RouteChoice(Enum):
    TO_CACHE = "cache"
    TO_UNCACHED = "uncached"


TO_CACHE = RouteChoice.TO_CACHE
TO_UNCACHED = RouteChoice.TO_UNCACHED

# Belief states; kept as small ints for cheap array storage.
UNKNOWN = 0
IN_CACHE = 1
NOT_IN_CACHE = -1


class UserBelief:
    """One user's belief about cache membership, learned from responses.

    A hit-delay response pins the file as cached, a miss-delay response as
    uncached; files never observed stay unknown.  Responses served over the
    uncached path carry no cache information.
    """

    __slots__ = ("_state",)

    def __init__(self, file_count: int):
        self._state = np.zeros(file_count + 1, dtype=np.int8)

    def observe_hit(self, file_id: int) -> None:
        self._state[file_id] = IN_CACHE

    def observe_miss(self, file_id: int) -> None:
        self._state[file_id] = NOT_IN_CACHE

    def state(self, file_id: int) -> int:
        return int(self._state[file_id])

    def believed_cached(self, file_id: int) -> bool:
        return self._state[file_id] == IN_CACHE


def greedy_route(file_id: int, belief: UserBelief, profile=None) -> RouteChoice:
    """Route to whichever path the current belief says is faster.

    With hit < uncached < miss delay this reduces to: believed-cached files go
    to the cache, everything else (including unknowns) to the uncached path.
    """
    return TO_CACHE if belief.believed_cached(file_id) else TO_UNCACHED


def optimized_routing_plan(profiles, capacity: int, delays) -> np.ndarray:
    """Per-user, per-file boolean plan from characteristic-time hit estimates.

    Hit probabilities are estimated as if all traffic went to the LRU cache;
    user i then sends file j to the cache iff the estimated cache delay
    ``h_j * hit_i + (1 - h_j) * miss_i`` beats their constant uncached delay.
    """
    rates = np.zeros(profiles[0].popularity.size)
    for prof in profiles:
        rates += prof.rate * prof.popularity
    hits = che_solve(rates, capacity).hits
    expected = np.outer(np.ones(len(profiles)), hits)
    expected = (expected * delays.hit_delay[:, None]
                + (1.0 - expected) * delays.miss_delay[:, None])
    return expected < delays.uncached_delay[:, None]


def crossover_cache_size(profiles, delays, lo: int = 1, hi: int | None = None) -> int:
    """Smallest capacity at which the plan fills the cache with the top files.

    Below it the plan routes fewer files than fit (the cache runs partially
    empty); above it more files than fit compete for slots.  The plan set is
    always a popularity prefix, so at the crossover it is exactly the top-C
    set and planned routing coincides with the oracle policy.  Exact equality
    between plan size and capacity need not occur (the plan size can jump by
    more than one per capacity step), so the first capacity reached by the
    plan size is returned.
    """
    if hi is None:
        hi = profiles[0].popularity.size - 1
    for capacity in range(lo, hi + 1):
        plan = optimized_routing_plan(profiles, capacity, delays)
        if int(plan[0].sum()) >= capacity:
            return capacity
    raise ValueError("no crossover in the searched range")


@dataclass(frozen=True)
class OptimalPlan:
    """Static cache set plus the routing rule of the oracle policy.

    Cached files always go to the cache.  For the constant path the rest go
    uncached (``split_p`` is 0); for the M/M/1 path they go to the cache with
    probability ``split_p`` (incurring a miss that does not update the cache).
    """

    cached: frozenset
    split_p: float


def optimal_policy(profiles, capacity: int, delays, path: str = "constant",
                   mu: float | None = None) -> OptimalPlan:
    """Oracle benchmark: rank by (weighted) popularity, cache the top files.

    Not implementable online; popularities are taken as known exactly.
    """
    if path == "constant":
        _, scores = weighted_popularity(profiles, delays)
        cached = frozenset(select_top_files(scores, capacity))
        return OptimalPlan(cached, 0.0)
    if path != "mm1":
        raise ValueError(f"unknown path model: {path!r}")
    if mu is None:
        raise ValueError("mm1 path needs a service rate")
    _, scores = weighted_popularity(profiles)
    cached = frozenset(select_top_files(scores, capacity))
    demand = 0.0
    for prof in profiles:
        mask = np.ones(prof.popularity.size, dtype=bool)
        mask[[f - 1 for f in cached]] = False
        demand += prof.rate * float(prof.popularity[mask].sum())
    miss_delay = float(delays.miss_delay[0])
    split = optimal_split_p(mu, miss_delay, demand) if demand > 0 else 0.0
    return OptimalPlan(cached, split)


def dcr_alpha_sensitive(rate_estimate: float, cache_delay: float, mu: float,
                        floor: float = 0.01) -> float:
    """Caching-phase traffic share minimizing the phase delay, M/M/1 path.

    Closed-form minimizer of ``a * cache_delay + (1-a)/(mu - (1-a)*rate)``,
    clamped to [floor, 1]: estimation needs a strictly positive share.
    """
    if rate_estimate <= 0 or cache_delay <= 0 or mu <= 0:
        raise ValueError("rate, cache delay and service rate must be positive")
    alpha = (math.sqrt(mu / cache_delay) - mu + rate_estimate) / rate_estimate
    return min(1.0, max(floor, alpha))


class DcrController:
    """Central agent plus per-user beliefs for the two-phase protocol.

    During the caching phase every user sends a fraction ``alpha`` of their
    requests to the cache, which counts them to estimate popularities and the
    aggregate rate.  In the routing phase users send believed-cached files to
    the cache and split the rest with probability ``p``; the agent keeps
    estimating from the hits and the inflated miss counts, refreshing the
    cached set periodically.  Contents only change at these boundaries; a miss
    never admits.

    ``variant="dcor"`` grants users perfect knowledge of the contents and
    routes greedily (benchmark; the p-split disappears, so only hits feed the
    routing-phase estimator).
    """

    CACHING = "caching"
    ROUTING = "routing"

    def __init__(self, n_users: int, file_count: int, capacity: int, delays,
                 path: str, mu: float | None, rng, *,
                 caching_phase_arrivals: int = 10_000,
                 routing_update_arrivals: int = 20_000,
                 recache_interval: int | None = None,
                 alpha: float | None = None, split_p: float | None = None,
                 count_decay: float = 0.95, variant: str = "dcr"):
        if variant not in ("dcr", "dcor"):
            raise ValueError(f"unknown variant: {variant!r}")
        if split_p is not None and not 0.0 < split_p <= 1.0:
            # p = 0 would blind the routing-phase estimator entirely
            raise ValueError("split_p must lie in (0, 1]")
        self.variant = variant
        self.path = path
        self.mu = mu
        self.capacity = capacity
        self.file_count = file_count
        self.hit_delay = float(delays.hit_delay[0])
        self.miss_delay = float(delays.miss_delay[0])
        self.caching_phase_arrivals = caching_phase_arrivals
        self.routing_update_arrivals = routing_update_arrivals
        self.recache_interval = recache_interval
        self.count_decay = count_decay
        self.p_floor, self.p_cap = 0.1, 0.9
        self._alpha_override = alpha
        self._p_override = split_p
        # With no estimates yet, start conservatively large on the M/M/1 path
        # so the uncached path cannot be congested by the first phase.
        self.alpha = alpha if alpha is not None else (0.5 if path == "constant" else 0.9)
        self.p = split_p if split_p is not None else 0.1
        self.phase = self.CACHING
        self.contents: set[int] = set()
        self._in_cache = np.zeros(file_count + 1, dtype=bool)
        self.beliefs = [UserBelief(file_count) for _ in range(n_users)]
        self.rate_estimate = 0.0
        self.cached_rate_estimate = 0.0
        self.q_hat = np.full(file_count, 1.0 / file_count)
        self._score = np.zeros(file_count)
        self._window_hits = np.zeros(file_count, dtype=np.int64)
        self._window_misses = np.zeros(file_count, dtype=np.int64)
        self._window_observed = 0
        self._window_hit_count = 0
        self._phase_start_time = 0.0
        self._arrivals_in_phase = 0
        self._arrivals_since_update = 0
        self._rng = rng
        self._coins = rng.random(8192).tolist()
        self._coin_i = 0

    # -- randomness ---------------------------------------------------------

    def _coin(self) -> float:
        i = self._coin_i
        if i >= 8192:
            self._coins = self._rng.random(8192).tolist()
            i = 0
        self._coin_i = i + 1
        return self._coins[i]

    # -- per-arrival processing ---------------------------------------------

    def process(self, now: float, user: int, file_id: int):
        """Route one request and serve it if it reaches the cache.

        Returns ``(route, outcome)`` where outcome is "hit"/"miss" for
        cache-routed requests and None otherwise.  Belief updates happen here
        because the user observes the response delay.
        """
        self._arrivals_in_phase += 1
        if self.phase == self.CACHING:
            route = TO_CACHE if self._coin() < self.alpha else TO_UNCACHED
            outcome = self._serve(user, file_id) if route is TO_CACHE else None
            if self._arrivals_in_phase >= self.caching_phase_arrivals:
                self._end_caching_phase(now)
            return route, outcome
        # routing phase
        if self.variant == "dcor":
            route = TO_CACHE if self._in_cache[file_id] else TO_UNCACHED
        elif self.beliefs[user].believed_cached(file_id):
            route = TO_CACHE
        else:
            route = TO_CACHE if self._coin() < self.p else TO_UNCACHED
        outcome = self._serve(user, file_id) if route is TO_CACHE else None
        self._arrivals_since_update += 1
        if self._arrivals_since_update >= self.routing_update_arrivals:
            self._refresh_estimates(now)
        if (self.recache_interval is not None
                and self._arrivals_in_phase >= self.recache_interval):
            self._enter_caching_phase(now)
        return route, outcome

    def _serve(self, user: int, file_id: int) -> str:
        self._window_observed += 1
        j = file_id - 1
        if self._in_cache[file_id]:
            self._window_hits[j] += 1
            self._window_hit_count += 1
            self.beliefs[user].observe_hit(file_id)
            return "hit"
        self._window_misses[j] += 1
        self.beliefs[user].observe_miss(file_id)
        return "miss"

    # -- phase bookkeeping ----------------------------------------------------

    def _fold_window(self, inflate_misses: bool) -> None:
        # Windows are rescaled to full-traffic equivalents before folding so
        # caching-phase (alpha-thinned) and routing-phase (p-split) counts mix
        # on a common scale.
        if inflate_misses:
            window = self._window_hits + self._window_misses / self.p
        else:
            window = (self._window_hits + self._window_misses) / self.alpha
        self._score = self.count_decay * self._score + window
        total = float(self._score.sum())
        if total > 0:
            self.q_hat = self._score / total
        self._window_hits.fill(0)
        self._window_misses.fill(0)

    def _select_contents(self) -> None:
        self.contents = set(select_top_files(self.q_hat, self.capacity))
        self._in_cache.fill(False)
        for fid in self.contents:
            self._in_cache[fid] = True

    def _update_split(self) -> None:
        if self._p_override is not None:
            self.p = self._p_override
            return
        if self.path == "constant":
            self.p = self.p_floor
            return
        uncached_share = 1.0 - float(
            sum(self.q_hat[fid - 1] for fid in self.contents))
        demand = self.rate_estimate * uncached_share
        if demand <= 0:
            self.p = self.p_floor
            return
        p_star = optimal_split_p(self.mu, self.miss_delay, demand)
        self.p = min(self.p_cap, max(self.p_floor, p_star))

    def _end_caching_phase(self, now: float) -> None:
        elapsed = max(now - self._phase_start_time, 1e-12)
        observed = self._window_observed
        self.rate_estimate = observed / (self.alpha * elapsed)
        self.cached_rate_estimate = self._window_hit_count / (self.alpha * elapsed)
        self._fold_window(inflate_misses=False)
        self._select_contents()
        self._update_split()
        self.phase = self.ROUTING
        self._phase_start_time = now
        self._arrivals_in_phase = 0
        self._arrivals_since_update = 0
        self._window_observed = 0
        self._window_hit_count = 0

    def _refresh_estimates(self, now: float) -> None:
        self._fold_window(inflate_misses=True)
        self._select_contents()
        self._update_split()
        self._arrivals_since_update = 0

    def _enter_caching_phase(self, now: float) -> None:
        # Fold the partial routing window at its own scale before switching.
        self._fold_window(inflate_misses=True)
        if self._alpha_override is not None:
            self.alpha = self._alpha_override
        elif self.path == "constant":
            self.alpha = 0.5
        elif self.rate_estimate > 0:
            cache_delay = self.estimated_cache_delay()
            self.alpha = dcr_alpha_sensitive(self.rate_estimate, cache_delay, self.mu)
        self.phase = self.CACHING
        self._phase_start_time = now
        self._arrivals_in_phase = 0
        self._window_observed = 0
        self._window_hit_count = 0

    def estimated_cache_delay(self) -> float:
        """Average cache delay implied by the rate estimates."""
        lam, lam_c = self.rate_estimate, self.cached_rate_estimate
        if lam <= 0:
            raise ValueError("no rate estimate available yet")
        return (lam_c * self.hit_delay + (lam - lam_c) * self.miss_delay) / lam

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "phase": self.phase,
            "alpha": self.alpha,
            "p": self.p,
            "rate_estimate": self.rate_estimate,
            "cached_rate_estimate": self.cached_rate_estimate,
            "contents": sorted(self.contents),
        }
