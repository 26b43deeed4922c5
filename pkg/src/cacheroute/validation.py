"""Self-check suite behind the ``validate`` CLI subcommand.

Each check compares an implementation against an independent oracle or a
closed-form identity and reports the observed figure next to the allowed
tolerance.  The default budget keeps a fresh-checkout run fast; ``full=True``
raises the simulation budgets to acceptance scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analytic_models import (
    AlphaTwoLruParams,
    alpha_two_lru_metrics,
    alpha_two_lru_stationary,
    che_solve,
    optimal_delay_insensitive,
    optimal_delay_sensitive,
    optimal_split_p,
)
from .path_models import mm1_expected_delay, simulate_mm1
from .scenarios import preset_centralized, preset_dcr
from .sim_engine import compare, run


@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    allowed: float
    passed: bool
    detail: str = ""


def _check(name, observed, allowed, detail="") -> CheckResult:
    return CheckResult(name, float(observed), float(allowed),
                       bool(observed <= allowed), detail)


def check_markov_normalization(draws: int = 10_000, seed: int = 7) -> CheckResult:
    """Stationary vector and metric partition sum to 1 on random simplexes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        q = rng.dirichlet((1.0, 1.0, 1.0))
        alpha = rng.random()
        params = AlphaTwoLruParams(float(q[0]), float(q[1]), float(q[2]), alpha)
        pi = alpha_two_lru_stationary(params)
        err = abs(pi.total() - 1.0)
        metrics = alpha_two_lru_metrics(pi, alpha)
        err = max(err, abs(sum(metrics) - 1.0))
        err = max(err, -min(pi.as_tuple()), -min(metrics))
        worst = max(worst, err)
    return _check("markov stationary normalization", worst, 1e-12,
                  f"{draws} random simplex draws")


def check_che_solution(seed: int = 11) -> CheckResult:
    """Fill-equation residual on random rate vectors plus a closed form."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(5, 400))
        rates = rng.uniform(0.01, 5.0, k)
        capacity = int(rng.integers(1, k))
        sol = che_solve(rates, capacity)
        worst = max(worst, abs(float(sol.hits.sum()) - capacity))
    # two-file closed form: rates (2, 1), capacity 1 -> x^2 + x = 1
    x = (math.sqrt(5.0) - 1.0) / 2.0
    sol = che_solve([2.0, 1.0], 1)
    worst = max(worst, abs(sol.hits[0] - (1 - x * x)), abs(sol.hits[1] - (1 - x)))
    return _check("characteristic-time fill residual", worst, 1e-9,
                  "50 random rate vectors + closed form")


def check_split_stationarity(seed: int = 13, triples: int = 100) -> CheckResult:
    """Optimal split satisfies the zero-derivative residual condition."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(triples):
        mu = rng.uniform(0.1, 2.0)
        miss_delay = rng.uniform(1.5 / mu, 20.0 / mu)
        target = mu - math.sqrt(mu / miss_delay)
        demand = rng.uniform(target + 0.01, target + 2.0)  # unclamped regime
        p = optimal_split_p(mu, miss_delay, demand)
        worst = max(worst, abs(demand * (1.0 - p) - target))
    return _check("optimal split residual", worst, 1e-9,
                  f"{triples} random (mu, miss delay, demand) triples")


def check_mm1_convergence(jobs: int = 1_000_000, seed: int = 17) -> list[CheckResult]:
    """Event-driven queue against the closed-form mean sojourn."""
    out = []
    for lam in (0.1, 0.25, 0.4):
        stats = simulate_mm1(0.5, lam, jobs, seed)
        expected = mm1_expected_delay(0.5, lam)
        rel = abs(stats.mean_sojourn - expected) / expected
        out.append(_check(f"mm1 sojourn lam={lam}", rel, 0.02,
                          f"{jobs} jobs vs {expected:.2f}"))
    return out


def check_optimal_matches_analytic(arrivals: int, seed: int = 23) -> CheckResult:
    """Simulated oracle policy against its closed-form delay, both paths."""
    worst = 0.0
    for path in ("constant", "mm1"):
        scenario = replace(
            preset_dcr(path=path, drift=False)[2], arrivals=arrivals, seed=seed)
        assert scenario.policy == "optimal"
        result = run(scenario)
        profiles = scenario.build_profiles()
        delays = scenario.delay_profile()
        from .routing_policies import optimal_policy
        plan = optimal_policy(profiles, scenario.cache_size, delays,
                              path, scenario.mu)
        if path == "constant":
            analytic = optimal_delay_insensitive(profiles, plan.cached, delays)
        else:
            analytic = optimal_delay_sensitive(
                profiles, plan.cached, scenario.hit_delay, scenario.miss_delay,
                scenario.mu, plan.split_p)
        worst = max(worst, abs(result.mean_delay - analytic) / analytic)
    return _check("optimal simulation vs closed form", worst, 0.02,
                  f"{arrivals} arrivals per path model")


def check_dominance(arrivals: int, replications: int, seed: int = 29) -> CheckResult:
    """No implemented policy beats the oracle beyond statistical noise."""
    scenarios = preset_centralized(cache_size=100)
    scenarios += [replace(s, drift_enabled=False)
                  for s in preset_dcr(path="constant", cache_size=100, drift=False)
                  if s.policy in ("dcr", "dcor")]
    scenarios = [replace(s, arrivals=arrivals, seed=seed) for s in scenarios]
    result = compare(scenarios, replications=replications)
    optimal = next(r for r in result.rows if r.policy == "optimal")
    margin = 0.0  # worst violation of the paired dominance floor
    for row in result.rows:
        diffs = np.asarray(row.replication_delays) - np.asarray(
            optimal.replication_delays)
        se = float(diffs.std(ddof=1) / math.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
        margin = max(margin, -(float(diffs.mean()) + 3.0 * se))
    return _check("oracle dominance", margin, 0.0,
                  f"{len(scenarios)} policies, {replications}x{arrivals} arrivals")


def run_validation(full: bool = False) -> list[CheckResult]:
    arrivals = 1_000_000 if full else 100_000
    replications = 10 if full else 3
    checks = [
        check_markov_normalization(),
        check_che_solution(),
        check_split_stationarity(),
    ]
    checks.extend(check_mm1_convergence())
    checks.append(check_optimal_matches_analytic(arrivals))
    checks.append(check_dominance(arrivals, replications))
    return checks


def format_report(checks) -> str:
    lines = [f"{'check':42s} {'observed':>12s} {'allowed':>12s}  status"]
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{c.name:42s} {c.observed:12.3e} {c.allowed:12.3e}  {status}"
                     + (f"  ({c.detail})" if c.detail else ""))
    return "\n".join(lines)
