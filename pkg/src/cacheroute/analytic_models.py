"""Closed-form calculators and optimizers.

Characteristic-time (working-set) analysis of LRU, the steady state of the
two-stage cache's per-file Markov chain with probabilistic forwarding, the
optimal split of uncached traffic toward an M/M/1 path, optimal static-cache
delays for both path models, and scalar searches for the best forwarding
probability and id-cache size.  Everything here is a pure function of its
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .path_models import UnstableQueueError, mm1_expected_delay

SIMPLEX_TOL = 1e-12


class InfeasibleError(RuntimeError):
    """No candidate keeps the uncached path stable."""


# ---------------------------------------------------------------------------
# Characteristic-time analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheSolution:
    """Characteristic time and per-file hit probabilities of an LRU cache."""

    characteristic_time: float
    hits: np.ndarray


def che_solve(rates, capacity: int) -> CheSolution:
    """Solve ``sum_j (1 - exp(-rate_j * t)) = capacity`` for the horizon t.

    Bracketed bisection; the returned per-file hit probabilities satisfy
    ``hits.sum() == capacity`` to well under 1e-9.  With ``capacity >= len(rates)``
    every file fits: all hit probabilities are 1 and the horizon is infinite.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 1 or rates.size == 0:
        raise ValueError("rates must be a nonempty vector")
    if np.any(rates <= 0):
        raise ValueError("all request rates must be positive")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    if capacity >= rates.size:
        return CheSolution(math.inf, np.ones(rates.size))

    def fill(t):
        return float(-np.expm1(-rates * t).sum())

    lo, hi = 1e-12, 1.0 / float(rates.max())
    for _ in range(200):
        if fill(hi) >= capacity:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the characteristic time")
    while fill(lo) > capacity:
        lo *= 0.5
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if fill(mid) < capacity:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return CheSolution(t, -np.expm1(-rates * t))


def _survival(rates, horizon: float):
    """P(next request for the file lands within the eviction horizon)."""
    if math.isinf(horizon):
        return np.ones_like(np.asarray(rates, dtype=float))
    return -np.expm1(-np.asarray(rates, dtype=float) * horizon)


# ---------------------------------------------------------------------------
# Two-stage cache steady state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaTwoLruParams:
    """Per-file transition parameters of the two-stage cache chain.

    ``q_a``, ``q_b``, ``q_c`` form a simplex: both stages retain the file
    between consecutive requests, both evict it, or only the content stage
    retains it.  ``alpha`` is the forwarding probability on a double miss.
    """

    q_a: float
    q_b: float
    q_c: float
    alpha: float

    def __post_init__(self):
        for name in ("q_a", "q_b", "q_c"):
            v = getattr(self, name)
            if not -SIMPLEX_TOL <= v <= 1.0 + SIMPLEX_TOL:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if abs(self.q_a + self.q_b + self.q_c - 1.0) > SIMPLEX_TOL:
            raise ValueError("q_a + q_b + q_c must equal 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class StationaryVector:
    """Steady-state probabilities over (id presence, content presence)."""

    p_00: float
    p_10: float
    p_01: float
    p_11: float

    def as_tuple(self):
        return (self.p_00, self.p_10, self.p_01, self.p_11)

    def total(self) -> float:
        return self.p_00 + self.p_10 + self.p_01 + self.p_11


def alpha_two_lru_stationary(params: AlphaTwoLruParams) -> StationaryVector:
    """Closed-form stationary vector of the per-file two-stage chain."""
    beta = 1.0 - params.alpha
    denom = 1.0 - beta * params.q_c
    if denom <= 0.0:
        raise ValueError("degenerate denominator: (1-alpha) * q_c == 1")
    p_00 = params.q_b / denom
    p_10 = beta * params.q_a * params.q_b / denom
    shrink = 1.0 - beta * p_00
    p_01 = params.q_c * shrink
    p_11 = params.q_a * shrink
    return StationaryVector(p_00, p_10, p_01, p_11)


def alpha_two_lru_metrics(pi: StationaryVector, alpha: float):
    """Hit, miss and deflection probabilities implied by a stationary vector."""
    p_hit = pi.p_01 + pi.p_11
    p_miss = alpha * pi.p_00 + pi.p_10
    p_4g = (1.0 - alpha) * pi.p_00
    return p_hit, p_miss, p_4g


def map_params_from_rate(rate: float, t_id: float, t_content: float,
                         alpha: float) -> AlphaTwoLruParams:
    """Chain parameters of one file from the two eviction horizons.

    Both stages see the same inter-request gap, so with survival
    probabilities ``a`` (id stage) and ``b`` (content stage): both survive
    with probability min(a, b), only the content survives with probability
    max(b - a, 0), and the double-eviction parameter absorbs the rest.  The
    mapping is exact whenever the id horizon does not exceed the content
    horizon (the usual regime, since the id stage sees all the traffic); for
    larger id horizons the id-survives/content-dies mass is folded into the
    double-eviction parameter.
    """
    if rate <= 0 or t_id <= 0 or t_content <= 0:
        raise ValueError("rate and horizons must be positive")
    a = float(_survival(np.array([rate]), t_id)[0])
    b = float(_survival(np.array([rate]), t_content)[0])
    return AlphaTwoLruParams(min(a, b), 1.0 - b, max(0.0, b - a), alpha)


def _two_stage_metrics(a, b, alpha: float):
    """Vectorized per-file (hit, miss, deflect) probabilities.

    Generalizes the closed-form stationary solution with a fourth survival
    split (id retained, content evicted) so the model stays exact when the id
    horizon exceeds the content horizon; it reduces to the simplex form when
    that mass is zero.
    """
    q_a = np.minimum(a, b)
    q_d = np.maximum(a - b, 0.0)
    q_c = np.maximum(b - a, 0.0)
    q_b = 1.0 - np.maximum(a, b)
    beta = 1.0 - alpha
    p_00 = q_b / (1.0 - beta * q_c)
    shrink = 1.0 - beta * p_00
    p_01 = q_c * shrink
    p_11 = q_a * shrink
    p_10 = q_d * shrink + beta * (q_a + q_d) * p_00
    return p_01 + p_11, alpha * p_00 + p_10, beta * p_00


@dataclass(frozen=True)
class TwoLruModel:
    """Per-file and aggregate steady-state metrics of the two-stage cache."""

    t_id: float
    t_content: float
    hit: np.ndarray
    miss: np.ndarray
    deflect: np.ndarray
    agg_hit: float
    agg_miss: float
    agg_deflect: float


def alpha_two_lru_model(rates, content_capacity: int, id_capacity: int | None = None,
                        alpha: float = 0.0,
                        content_fill: str = "occupancy") -> TwoLruModel:
    """Characteristic-time model of the two-stage cache.

    The id stage sees the full request stream, so its horizon comes from the
    plain fill equation.  For the content stage two fill rules are available:

    - ``occupancy`` (default): solve for the horizon at which the summed
      per-file steady-state presence probabilities equal the capacity.  This
      keeps the fill self-consistent with the chain that uses it.
    - ``filtered``: plain fill equation under id-filtered insertion rates
      ``rate * id_occupancy``.

    Aggregate metrics are request-weighted.
    """
    rates = np.asarray(rates, dtype=float)
    k = rates.size
    if id_capacity is None:
        id_capacity = content_capacity
    t_id = che_solve(rates, id_capacity).characteristic_time if id_capacity < k else math.inf
    a = _survival(rates, t_id)

    if content_capacity >= k:
        t_content = math.inf
    elif content_fill == "filtered":
        t_content = che_solve(rates * a, content_capacity).characteristic_time
    elif content_fill == "occupancy":
        def presence(t):
            hit, _, _ = _two_stage_metrics(a, _survival(rates, t), alpha)
            return float(hit.sum())

        lo, hi = 1e-12, 1.0 / float(rates.max())
        for _ in range(200):
            if presence(hi) >= content_capacity:
                break
            hi *= 2.0
        else:
            raise RuntimeError("failed to bracket the content horizon")
        while hi - lo > 1e-12 * hi:
            mid = 0.5 * (lo + hi)
            if presence(mid) < content_capacity:
                lo = mid
            else:
                hi = mid
        t_content = 0.5 * (lo + hi)
    else:
        raise ValueError(f"unknown content_fill rule: {content_fill!r}")

    b = _survival(rates, t_content)
    hit, miss, deflect = _two_stage_metrics(a, b, alpha)
    w = rates / rates.sum()
    return TwoLruModel(
        t_id, t_content, hit, miss, deflect,
        float(w @ hit), float(w @ miss), float(w @ deflect),
    )


def alpha_two_lru_delay(rates, content_capacity: int, id_capacity: int | None,
                        alpha: float, hit_delay: float, miss_delay: float,
                        mu: float, content_fill: str = "occupancy") -> float:
    """Per-request delay of the two-stage cache with an M/M/1 uncached path.

    Deflected traffic flows through the queue; hits and forwarded misses are
    charged the flat cache delays.  Raises :class:`UnstableQueueError` when
    the deflected load reaches the service rate.
    """
    rates = np.asarray(rates, dtype=float)
    model = alpha_two_lru_model(rates, content_capacity, id_capacity, alpha,
                                content_fill)
    total = float(rates.sum())
    load_4g = total * model.agg_deflect
    if load_4g >= mu:
        raise UnstableQueueError(
            f"deflected load {load_4g:.4f} >= service rate {mu}")
    queue_term = load_4g / (mu - load_4g)
    cache_term = total * (model.agg_hit * hit_delay + model.agg_miss * miss_delay)
    return (cache_term + queue_term) / total


# ---------------------------------------------------------------------------
# Optimal static caching and routing
# ---------------------------------------------------------------------------

def optimal_split_p(mu: float, miss_delay: float, uncached_demand: float) -> float:
    """Uniform cache-share of uncached traffic minimizing the split delay.

    From the stationarity condition the residual queue load equals
    ``mu - sqrt(mu / miss_delay)``; the result is clamped to [0, 1] since the
    objective is convex and the boundary is optimal whenever the formula
    leaves the interval (small demand pushes it below 0).
    """
    if mu <= 0:
        raise ValueError("service rate must be positive")
    if miss_delay <= 1.0 / mu:
        raise ValueError("miss delay must exceed the mean service time")
    if uncached_demand <= 0:
        raise ValueError("uncached demand must be positive")
    p = 1.0 - (mu - math.sqrt(mu / miss_delay)) / uncached_demand
    return min(1.0, max(0.0, p))


def optimal_delay_insensitive(profiles, cached, delays) -> float:
    """Per-request delay of static caching + greedy routing, constant path.

    Cached files are served at the per-user hit delay, everything else over
    the constant uncached path.
    """
    total = 0.0
    weighted = 0.0
    for i, prof in enumerate(profiles):
        q = prof.popularity
        mask = _cached_mask(q.size, cached)
        hit_mass = float(q[mask].sum())
        weighted += prof.rate * (hit_mass * float(delays.hit_delay[i])
                                 + (1.0 - hit_mass) * float(delays.uncached_delay[i]))
        total += prof.rate
    return weighted / total


def optimal_delay_sensitive(profiles, cached, hit_delay: float, miss_delay: float,
                            mu: float, split) -> float:
    """Per-request delay of static caching with split routing, M/M/1 path.

    ``split`` is the fraction of uncached-content traffic sent to the cache
    (scalar, or one value per user).  Misses do not update the cache; the
    residual uncached load must stay below the service rate.
    """
    splits = np.broadcast_to(np.asarray(split, dtype=float), (len(profiles),))
    total = 0.0
    cached_rate = 0.0
    miss_rate = 0.0
    queue_rate = 0.0
    for i, prof in enumerate(profiles):
        q = prof.popularity
        mask = _cached_mask(q.size, cached)
        hit_mass = float(q[mask].sum())
        uncached = prof.rate * (1.0 - hit_mass)
        cached_rate += prof.rate * hit_mass
        miss_rate += uncached * float(splits[i])
        queue_rate += uncached * (1.0 - float(splits[i]))
        total += prof.rate
    if queue_rate >= mu:
        raise UnstableQueueError(
            f"residual uncached load {queue_rate:.4f} >= service rate {mu}")
    queue_term = queue_rate / (mu - queue_rate) if queue_rate > 0 else 0.0
    return (cached_rate * hit_delay + miss_rate * miss_delay + queue_term) / total


def _cached_mask(file_count: int, cached) -> np.ndarray:
    mask = np.zeros(file_count, dtype=bool)
    if cached:
        idx = np.fromiter(cached, dtype=int) - 1
        mask[idx] = True
    return mask


def weighted_popularity(profiles, delays=None):
    """Rank files by aggregate popularity, optionally delay-weighted.

    With ``delays`` given the score of file j is
    ``sum_i rate_i * q_ij * (uncached_i - hit_i)`` (the constant-path cache
    ranking); without it plain ``sum_i rate_i * q_ij``.  Returns
    ``(ranked_ids, scores)`` with ties broken toward the lower file id.
    """
    k = profiles[0].popularity.size
    scores = np.zeros(k)
    for i, prof in enumerate(profiles):
        gain = 1.0
        if delays is not None:
            gain = float(delays.uncached_delay[i]) - float(delays.hit_delay[i])
        scores += prof.rate * gain * prof.popularity
    order = np.argsort(-scores, kind="stable") + 1
    return order, scores


def select_top_files(scores, count: int):
    """File ids of the ``count`` highest scores, lower id winning ties."""
    order = np.argsort(-np.asarray(scores), kind="stable")
    return [int(j) + 1 for j in order[:count]]


# ---------------------------------------------------------------------------
# Scalar searches
# ---------------------------------------------------------------------------

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_minimize(f, lo: float, hi: float, tol: float = 1e-4):
    """Golden-section search for a unimodal scalar minimum on [lo, hi]."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def optimize_alpha(rates, content_capacity: int, id_capacity: int | None,
                   hit_delay: float, miss_delay: float, mu: float,
                   grid_points: int = 101, tol: float = 1e-4,
                   content_fill: str = "occupancy"):
    """Forwarding probability minimizing the modeled per-request delay.

    Scans a regular grid over [0, 1], skipping values whose deflected load
    would destabilize the queue, then refines around the best grid point by
    golden-section search.  Raises :class:`InfeasibleError` if no grid point
    is stable.
    """
    def objective(alpha):
        try:
            return alpha_two_lru_delay(rates, content_capacity, id_capacity,
                                       alpha, hit_delay, miss_delay, mu,
                                       content_fill)
        except UnstableQueueError:
            return math.inf

    grid = np.linspace(0.0, 1.0, grid_points)
    values = [objective(a) for a in grid]
    best = int(np.argmin(values))
    if math.isinf(values[best]):
        raise InfeasibleError("uncached path unstable for every alpha")
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid_points - 1)]
    alpha_star, d_star = golden_section_minimize(objective, float(lo), float(hi), tol)
    if values[best] < d_star:
        return float(grid[best]), values[best]
    return float(alpha_star), float(d_star)


def optimize_id_cache_size(rates, content_capacity: int, hit_delay: float,
                           miss_delay: float, mu: float, candidates=None,
                           content_fill: str = "occupancy"):
    """Id-cache size minimizing the deterministic two-stage cache delay.

    Exhaustive scan (the catalog is desk-scale); unstable candidates are
    skipped.  Returns ``(best_size, best_delay)``; ties go to the smaller
    size.
    """
    rates = np.asarray(rates, dtype=float)
    if candidates is None:
        candidates = range(1, rates.size + 1)
    best_size, best_delay = None, math.inf
    for c_id in candidates:
        try:
            d = alpha_two_lru_delay(rates, content_capacity, int(c_id), 0.0,
                                    hit_delay, miss_delay, mu, content_fill)
        except UnstableQueueError:
            continue
        if d < best_delay:
            best_size, best_delay = int(c_id), d
    if best_size is None:
        raise InfeasibleError("uncached path unstable for every id-cache size")
    return best_size, best_delay


def dcr_caching_phase_delay(alpha: float, cache_delay: float, lam: float,
                            mu: float) -> float:
    """Mean delay while a fraction ``alpha`` of all traffic goes to the cache.

    The remainder flows through the M/M/1 uncached path, which must remain
    stable.
    """
    residual = (1.0 - alpha) * lam
    return alpha * cache_delay + (1.0 - alpha) * mm1_expected_delay(mu, residual)


@dataclass(frozen=True)
class AnalyticReport:
    """Named closed-form quantities of one scenario, serializable as CSV."""

    scenario_id: str
    quantities: tuple

    def rows(self):
        return [(self.scenario_id, name, value) for name, value in self.quantities]

    def to_csv_text(self) -> str:
        lines = ["scenario_id,quantity,value"]
        lines += [f"{sid},{name},{value!r}" for sid, name, value in self.rows()]
        return "\n".join(lines) + "\n"
