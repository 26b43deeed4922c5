"""Deterministic discrete-event loop tying workload, routing, caches and the
uncached-path models together.

One master seed derives an independent stream per stochastic component
(arrivals, drift, policy coins, queue service), so changing the policy never
perturbs the request sequence and paired-seed comparisons stay meaningful.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import cache_policies as cp
from .analytic_models import select_top_files, weighted_popularity
from .path_models import DelayProfile, Mm1Queue, UnstableQueueError
from .routing_policies import (
    TO_UNCACHED,
    DcrController,
    optimal_policy,
    optimized_routing_plan,
)
from .workload import DriftConfig, DriftProcess, RequestSampler, UserProfile, zipf_popularity

POLICIES = (
    "lru",
    "optimized-caching",
    "optimized-routing",
    "optimal",
    "dcr",
    "dcor",
    "two-lru",
    "alpha-two-lru",
)

_COMPONENTS = {"workload": 0, "drift": 1, "policy": 2, "service": 3}

# Outcome classes of one request (engine-internal small ints).
_HIT, _MISS, _DEFLECT, _UNCACHED = 0, 1, 2, 3
OUTCOME_NAMES = ("hit", "miss", "deflect", "uncached")


def component_rng(seed: int, component: str) -> np.random.Generator:
    """Independent generator for one stochastic component of a run."""
    key = _COMPONENTS[component]
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def replication_seed(seed: int, replication: int) -> int:
    """Derived master seed of one replication; stable across platforms."""
    return int(np.random.SeedSequence((seed, replication)).generate_state(1)[0])


@dataclass(frozen=True)
class Scenario:
    """Full description of one experiment."""

    name: str = "scenario"
    seed: int = 0
    arrivals: int = 1_000_000
    window: int = 10_000
    # workload
    n_users: int = 5
    user_rate: float = 0.2
    file_count: int = 1000
    zipf_skew: float = 0.8
    # delays (time units)
    hit_delay: float = 1.0
    miss_delay: float = 8.0
    uncached_delay: float = 5.0
    # uncached path
    path: str = "constant"  # constant | mm1
    mu: float = 0.5
    # policy
    policy: str = "optimal"
    cache_size: int = 100
    id_cache_size: int | None = None
    alpha: float | None = None
    split_p: float | None = None
    caching_phase_arrivals: int = 10_000
    routing_update_arrivals: int = 20_000
    recache_interval: int | None = None
    estimate_decay: float = 0.95
    # drift
    drift_enabled: bool = False
    drift_probability: float = 0.01
    collect_records: bool = False

    def validate(self) -> None:
        if self.seed is None:
            raise ValueError("a seed is mandatory")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if self.path not in ("constant", "mm1"):
            raise ValueError(f"unknown path model {self.path!r}")
        if self.arrivals < 1 or self.window < 1:
            raise ValueError("arrivals and window must be positive")
        if not 1 <= self.cache_size:
            raise ValueError("cache_size must be >= 1")
        if self.policy == "alpha-two-lru" and self.alpha is None:
            raise ValueError("alpha-two-lru needs an explicit alpha")
        if self.alpha is not None and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        delays = self.delay_profile()
        if self.path == "constant":
            delays.validate_constant_path()
        else:
            delays.validate_mm1_path(self.mu)
        DriftConfig(self.drift_enabled, self.drift_probability)

    def delay_profile(self) -> DelayProfile:
        return DelayProfile.homogeneous(
            self.hit_delay, self.miss_delay, self.uncached_delay, self.n_users)

    def build_profiles(self) -> list[UserProfile]:
        base = zipf_popularity(self.file_count, self.zipf_skew)
        return [UserProfile(i, self.user_rate, base.copy())
                for i in range(self.n_users)]

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RequestRecord:
    """Lifecycle of one request."""

    arrival: float
    user: int
    file_id: int
    outcome: str
    delay: float
    phase: str = ""


@dataclass(frozen=True)
class MetricsWindow:
    """Counters for one metrics window plus running (cumulative) values."""

    end_arrivals: int
    arrivals: int
    delay_sum: float
    hits: int
    misses: int
    deflects: int
    uncached: int
    cum_delay_sum: float
    cum_hits: int
    cum_misses: int
    cum_deflects: int
    cum_uncached: int

    @property
    def window_mean_delay(self) -> float:
        return self.delay_sum / self.arrivals

    @property
    def mean_delay(self) -> float:
        """Running average delay over all arrivals so far."""
        return self.cum_delay_sum / self.end_arrivals

    def rates(self) -> dict:
        n = self.end_arrivals
        return {
            "hit_rate": self.cum_hits / n,
            "miss_rate": self.cum_misses / n,
            "deflect_rate": self.cum_deflects / n,
            "uncached_rate": self.cum_uncached / n,
        }


@dataclass
class SimResult:
    scenario: Scenario
    windows: list[MetricsWindow]
    summary: dict
    records: list[RequestRecord] | None = None

    @property
    def mean_delay(self) -> float:
        return self.summary["mean_delay"]


# ---------------------------------------------------------------------------
# Policy drivers
# ---------------------------------------------------------------------------

class _BufferedCoins:
    __slots__ = ("_rng", "_buf", "_i")

    def __init__(self, rng):
        self._rng = rng
        self._buf = rng.random(8192).tolist()
        self._i = 0

    def next(self) -> float:
        i = self._i
        if i >= 8192:
            self._buf = self._rng.random(8192).tolist()
            i = 0
        self._i = i + 1
        return self._buf[i]


class _LruDriver:
    """Baseline: every request goes to an LRU cache."""

    def __init__(self, scenario):
        self.state = cp.LruState(scenario.cache_size)

    def process(self, now, user, file_id):
        out = cp.lru_access(self.state, file_id)
        return _HIT if out.kind is cp.OutcomeKind.HIT else _MISS

    def on_drift(self, profiles):
        pass

    def summary(self):
        return {"cache": self.state.snapshot()}


class _StaticAllToCacheDriver:
    """Statically cache the most popular files; route everything to the cache."""

    def __init__(self, scenario, profiles, delays):
        _, scores = weighted_popularity(profiles, delays if scenario.path == "constant" else None)
        self.state = cp.StaticState(select_top_files(scores, scenario.cache_size))

    def process(self, now, user, file_id):
        out = cp.static_access(self.state, file_id)
        return _HIT if out.kind is cp.OutcomeKind.HIT else _MISS

    def on_drift(self, profiles):
        pass  # contents are fixed for the whole run

    def summary(self):
        return {"cache": self.state.snapshot()}


class _PlannedRoutingDriver:
    """LRU cache plus the per-user plan from characteristic-time estimates."""

    def __init__(self, scenario, profiles, delays):
        self.state = cp.LruState(scenario.cache_size)
        self.plan = optimized_routing_plan(profiles, scenario.cache_size, delays)

    def process(self, now, user, file_id):
        if not self.plan[user, file_id - 1]:
            return _UNCACHED
        out = cp.lru_access(self.state, file_id)
        return _HIT if out.kind is cp.OutcomeKind.HIT else _MISS

    def on_drift(self, profiles):
        pass  # the plan is computed once, up front

    def summary(self):
        return {"cache": self.state.snapshot()}


class _OptimalDriver:
    """Oracle: static-optimal contents and routing from true popularities.

    With drifting demand the plan is recomputed whenever the popularities
    actually change (equivalent to re-deriving it before every arrival, since
    it only depends on the current popularity state).
    """

    def __init__(self, scenario, profiles, delays, coins):
        self.scenario = scenario
        self.profiles = profiles
        self.delays = delays
        self.coins = coins
        self._recompute()

    def _recompute(self):
        plan = optimal_policy(
            self.profiles, self.scenario.cache_size, self.delays,
            self.scenario.path, self.scenario.mu)
        self.split = plan.split_p
        self._in_cache = np.zeros(self.scenario.file_count + 1, dtype=bool)
        for fid in plan.cached:
            self._in_cache[fid] = True
        self.cached = plan.cached

    def process(self, now, user, file_id):
        if self._in_cache[file_id]:
            return _HIT
        if self.scenario.path == "constant":
            return _UNCACHED
        if self.split >= 1.0 or (self.split > 0.0 and self.coins.next() < self.split):
            return _MISS  # split share absorbs a miss; the cache is not updated
        return _UNCACHED

    def on_drift(self, profiles):
        self._recompute()

    def summary(self):
        return {"split_p": self.split, "cached_files": len(self.cached)}


class _DcrDriver:
    """Two-phase distributed policy (or its perfect-knowledge benchmark)."""

    def __init__(self, scenario, delays, rng, variant):
        self.controller = DcrController(
            scenario.n_users, scenario.file_count, scenario.cache_size,
            delays, scenario.path, scenario.mu, rng,
            caching_phase_arrivals=scenario.caching_phase_arrivals,
            routing_update_arrivals=scenario.routing_update_arrivals,
            recache_interval=scenario.recache_interval,
            alpha=scenario.alpha, split_p=scenario.split_p,
            count_decay=scenario.estimate_decay, variant=variant)

    @property
    def phase(self):
        return self.controller.phase

    def process(self, now, user, file_id):
        route, outcome = self.controller.process(now, user, file_id)
        if route is TO_UNCACHED:
            return _UNCACHED
        return _HIT if outcome == "hit" else _MISS

    def on_drift(self, profiles):
        pass  # the whole point: the agent only sees traffic

    def summary(self):
        return self.controller.summary()


class _TwoLruDriver:
    """Central agent running the two-stage cache; deflections go uncached."""

    def __init__(self, scenario, coins):
        alpha = scenario.alpha if scenario.policy == "alpha-two-lru" else 0.0
        self.state = cp.TwoLruState(
            scenario.cache_size, scenario.id_cache_size,
            alpha if alpha is not None else 0.0)
        self.deterministic = scenario.policy == "two-lru"
        self.coins = coins

    def process(self, now, user, file_id):
        if self.deterministic:
            out = cp.two_lru_access(self.state, file_id)
        else:
            out = cp.alpha_two_lru_access(self.state, file_id, self.coins)
        if out.kind is cp.OutcomeKind.HIT:
            return _HIT
        if out.kind is cp.OutcomeKind.MISS:
            return _MISS
        return _DEFLECT

    def on_drift(self, profiles):
        pass

    def summary(self):
        return {"cache": self.state.snapshot()}


class _CoinRng:
    """Adapter giving cache_policies a .random() backed by buffered draws."""

    __slots__ = ("_coins",)

    def __init__(self, coins):
        self._coins = coins

    def random(self):
        return self._coins.next()


def _build_driver(scenario, profiles, delays, policy_rng):
    coins = _BufferedCoins(policy_rng)
    policy = scenario.policy
    if policy == "lru":
        return _LruDriver(scenario)
    if policy == "optimized-caching":
        return _StaticAllToCacheDriver(scenario, profiles, delays)
    if policy == "optimized-routing":
        return _PlannedRoutingDriver(scenario, profiles, delays)
    if policy == "optimal":
        return _OptimalDriver(scenario, profiles, delays, coins)
    if policy in ("dcr", "dcor"):
        return _DcrDriver(scenario, delays, policy_rng, policy)
    if policy in ("two-lru", "alpha-two-lru"):
        return _TwoLruDriver(scenario, _CoinRng(coins))
    raise ValueError(f"unknown policy {policy!r}")


# ---------------------------------------------------------------------------
# The event loop
# ---------------------------------------------------------------------------

def run(scenario: Scenario) -> SimResult:
    """Process the arrival budget event by event and collect metrics.

    Identical seeds give bit-identical results.  Sustained overload of the
    M/M/1 uncached path aborts with :class:`UnstableQueueError`.
    """
    scenario.validate()
    profiles = scenario.build_profiles()
    delays = scenario.delay_profile()

    sampler = RequestSampler(
        profiles, component_rng(scenario.seed, "workload"),
        file_block=512 if scenario.drift_enabled else 4096)
    drift = None
    if scenario.drift_enabled:
        drift = DriftProcess(
            component_rng(scenario.seed, "drift"), profiles,
            DriftConfig(True, scenario.drift_probability))
    queue = (Mm1Queue(scenario.mu, component_rng(scenario.seed, "service"))
             if scenario.path == "mm1" else None)
    driver = _build_driver(scenario, profiles, delays,
                           component_rng(scenario.seed, "policy"))

    hit_d = delays.hit_delay.tolist()
    miss_d = delays.miss_delay.tolist()
    unc_d = delays.uncached_delay.tolist()
    # Sustained overload shows up as backlog growing window after window far
    # past any stable-queue excursion.  Transient humps (e.g. the belief
    # warmup right after a phase switch) build and then drain, so a single
    # large backlog is not enough to abort.
    backlog_limit = 1000.0 / scenario.mu
    prev_backlog = 0.0
    growth_streak = 0

    windows: list[MetricsWindow] = []
    records: list[RequestRecord] | None = [] if scenario.collect_records else None
    counts = [0, 0, 0, 0]
    cum_counts = [0, 0, 0, 0]
    delay_sum = 0.0
    cum_delay_sum = 0.0
    w_arrivals = 0
    now = 0.0
    window_size = scenario.window
    is_dcr = isinstance(driver, _DcrDriver)

    for n in range(1, scenario.arrivals + 1):
        gap, user, file_id = sampler.next()
        now += gap
        if drift is not None:
            event = drift.step()
            if event.changed:
                sampler.invalidate(event.user_index)
                driver.on_drift(profiles)
        outcome = driver.process(now, user, file_id)
        if outcome == _HIT:
            delay = hit_d[user]
        elif outcome == _MISS:
            delay = miss_d[user]
        elif queue is not None:
            delay = queue.submit(now) - now
        else:
            delay = unc_d[user]
        counts[outcome] += 1
        delay_sum += delay
        w_arrivals += 1
        if records is not None:
            records.append(RequestRecord(
                now, user, file_id, OUTCOME_NAMES[outcome], delay,
                driver.phase if is_dcr else ""))
        if w_arrivals >= window_size:
            cum_delay_sum += delay_sum
            for i in range(4):
                cum_counts[i] += counts[i]
            windows.append(MetricsWindow(
                n, w_arrivals, delay_sum, counts[0], counts[1], counts[2],
                counts[3], cum_delay_sum, cum_counts[0], cum_counts[1],
                cum_counts[2], cum_counts[3]))
            counts = [0, 0, 0, 0]
            delay_sum = 0.0
            w_arrivals = 0
            if queue is not None:
                backlog = queue.backlog(now)
                growth_streak = growth_streak + 1 if backlog > prev_backlog else 0
                prev_backlog = backlog
                if backlog > backlog_limit and growth_streak >= 5:
                    raise UnstableQueueError(
                        f"uncached path overloaded: backlog {backlog:.0f} "
                        f"time units and growing after {n} arrivals "
                        f"(service rate {scenario.mu}, policy {scenario.policy})")

    if w_arrivals > 0:  # trailing partial window
        cum_delay_sum += delay_sum
        for i in range(4):
            cum_counts[i] += counts[i]
        windows.append(MetricsWindow(
            scenario.arrivals, w_arrivals, delay_sum, counts[0], counts[1],
            counts[2], counts[3], cum_delay_sum, cum_counts[0], cum_counts[1],
            cum_counts[2], cum_counts[3]))

    total = scenario.arrivals
    summary = {
        "arrivals": total,
        "mean_delay": cum_delay_sum / total,
        "hit_rate": cum_counts[0] / total,
        "miss_rate": cum_counts[1] / total,
        "deflect_rate": cum_counts[2] / total,
        "uncached_rate": cum_counts[3] / total,
        "sim_time": now,
        "policy": driver.summary(),
    }
    return SimResult(scenario, windows, summary, records)


# ---------------------------------------------------------------------------
# Replicated comparisons
# ---------------------------------------------------------------------------

# Fields allowed to differ between compared scenarios.
_COMPARE_DIMENSIONS = {
    "name", "policy", "cache_size", "id_cache_size", "alpha", "split_p",
    "caching_phase_arrivals", "routing_update_arrivals", "recache_interval",
    "estimate_decay",
}


@dataclass(frozen=True)
class CompareRow:
    name: str
    policy: str
    mean_delay: float
    stderr: float
    replication_delays: tuple


@dataclass(frozen=True)
class CompareResult:
    rows: list[CompareRow]
    replications: int


def _run_replication(args):
    scenario_dict, seed = args
    scenario = Scenario(**scenario_dict)
    result = run(replace(scenario, seed=seed, collect_records=False))
    return result.summary


def compare(scenarios, replications: int = 10, parallel: bool | None = None) -> CompareResult:
    """Paired-seed replicated runs of scenarios differing only in policy knobs.

    Every scenario is run with the same derived seed per replication, so the
    request streams match across policies.  Returns per-scenario mean delay
    and its standard error over the replications.
    """
    base = scenarios[0].to_dict()
    for s in scenarios[1:]:
        for key, value in s.to_dict().items():
            if key not in _COMPARE_DIMENSIONS and value != base[key]:
                raise ValueError(
                    f"scenario {s.name!r} differs in undeclared dimension {key!r}")
    seeds = [replication_seed(scenarios[0].seed, r) for r in range(replications)]
    jobs = [(s.to_dict(), seed) for s in scenarios for seed in seeds]

    if parallel is None:
        parallel = len(jobs) > 1
    workers = int(os.environ.get("CACHEROUTE_WORKERS", os.cpu_count() or 1))
    if parallel and workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            summaries = list(pool.map(_run_replication, jobs))
    else:
        summaries = [_run_replication(job) for job in jobs]

    rows = []
    for i, s in enumerate(scenarios):
        delays = [summaries[i * replications + r]["mean_delay"]
                  for r in range(replications)]
        arr = np.asarray(delays)
        stderr = float(arr.std(ddof=1) / np.sqrt(replications)) if replications > 1 else 0.0
        rows.append(CompareRow(s.name, s.policy, float(arr.mean()), stderr, tuple(delays)))
    return CompareResult(rows, replications)
