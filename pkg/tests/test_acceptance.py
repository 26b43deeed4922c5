"""Acceptance suite: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line.  The simulation-heavy criteria share
session fixtures; the whole module is marked ``acceptance`` (several minutes
of wall time, dominated by the ten-replication million-arrival grids).
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from cacheroute.analytic_models import (
    AlphaTwoLruParams,
    alpha_two_lru_metrics,
    alpha_two_lru_model,
    alpha_two_lru_stationary,
    golden_section_minimize,
    optimal_delay_insensitive,
    optimal_delay_sensitive,
    optimal_split_p,
    optimize_alpha,
    optimize_id_cache_size,
)
from cacheroute.cli import main
from cacheroute.path_models import mm1_expected_delay, simulate_mm1
from cacheroute.routing_policies import crossover_cache_size, optimal_policy
from cacheroute.scenarios import TWO_LRU_CACHE_SIZE, preset_centralized, preset_dcr
from cacheroute.sim_engine import Scenario, compare, replication_seed, run
from cacheroute.workload import zipf_popularity

pytestmark = pytest.mark.acceptance

POLICY_ORDER = ("lru", "optimized-caching", "optimized-routing", "dcr", "dcor",
                "optimal")


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def centralized_grid(cache_size, seed=101, arrivals=1_000_000, replications=10):
    scenarios = [s for s in preset_centralized(cache_size=cache_size)]
    scenarios += [s for s in preset_dcr(path="constant", cache_size=cache_size,
                                        drift=False)
                  if s.policy in ("dcr", "dcor")]
    scenarios = [replace(s, seed=seed, arrivals=arrivals) for s in scenarios]
    order = {p: i for i, p in enumerate(POLICY_ORDER)}
    scenarios.sort(key=lambda s: order[s.policy])
    return compare(scenarios, replications=replications)


@pytest.fixture(scope="session")
def dominance_grids():
    return {c: centralized_grid(c) for c in (100, 300, 500)}


class TestCriterion1MarkovClosedForm:
    def test_stationary_normalization_bulk(self):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(10_000):
            q = rng.dirichlet((1.0, 1.0, 1.0))
            alpha = float(rng.random())
            params = AlphaTwoLruParams(float(q[0]), float(q[1]), float(q[2]), alpha)
            pi = alpha_two_lru_stationary(params)
            metrics = alpha_two_lru_metrics(pi, alpha)
            worst = max(worst,
                        abs(pi.total() - 1.0),
                        abs(sum(metrics) - 1.0),
                        -min(pi.as_tuple()),
                        -min(metrics))
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-12 and elapsed < 1.0
        report(1, ok, f"worst deviation {worst:.2e} (tol 1e-12), "
                      f"runtime {elapsed:.2f}s (limit 1s)")
        assert worst <= 1e-12
        assert elapsed < 1.0


class TestCriterion2Mm1Fidelity:
    def test_mean_sojourn_three_loads(self):
        start = time.perf_counter()
        worst = 0.0
        details = []
        for lam in (0.1, 0.25, 0.4):
            stats = simulate_mm1(0.5, lam, 1_000_000, seed=17)
            expected = mm1_expected_delay(0.5, lam)
            rel = abs(stats.mean_sojourn - expected) / expected
            worst = max(worst, rel)
            details.append(f"lam={lam}: {rel:.2%}")
        elapsed = time.perf_counter() - start
        ok = worst <= 0.02 and elapsed < 30.0
        report(2, ok, f"{'; '.join(details)} (tol 2%), runtime {elapsed:.1f}s "
                      f"(limit 30s)")
        assert worst <= 0.02
        assert elapsed < 30.0


class TestCriterion3SplitConsistency:
    def test_residual_and_numeric_minimizer(self):
        rng = np.random.default_rng(303)
        worst_residual = 0.0
        worst_gap = 0.0
        for _ in range(100):
            mu = float(rng.uniform(0.1, 2.0))
            hit_delay = float(rng.uniform(0.05, 0.9)) / mu  # below 1/mu
            miss_delay = float(rng.uniform(1.5, 20.0)) / mu  # above 1/mu
            target = mu - math.sqrt(mu / miss_delay)
            demand = float(rng.uniform(target + 0.01, target + 2.0))
            p_star = optimal_split_p(mu, miss_delay, demand)
            worst_residual = max(worst_residual,
                                 abs(demand * (1.0 - p_star) - target))

            def split_objective(p):
                residual = demand * (1.0 - p)
                if residual >= mu:
                    return math.inf
                return demand * p * miss_delay + residual / (mu - residual)

            grid = np.linspace(0.0, 1.0, 4001)
            best = int(np.argmin([split_objective(p) for p in grid]))
            lo = grid[max(best - 1, 0)]
            hi = grid[min(best + 1, 4000)]
            numeric, _ = golden_section_minimize(split_objective, float(lo),
                                                 float(hi), tol=1e-10)
            worst_gap = max(worst_gap, abs(p_star - numeric))
        ok = worst_residual <= 1e-9 and worst_gap <= 1e-6
        report(3, ok, f"worst first-order residual {worst_residual:.2e} "
                      f"(tol 1e-9), worst minimizer gap {worst_gap:.2e} "
                      f"(tol 1e-6), 100 triples")
        assert worst_residual <= 1e-9
        assert worst_gap <= 1e-6


class TestCriterion4Dominance:
    def test_no_policy_beats_the_oracle(self, dominance_grids):
        violations = []
        details = []
        for c, result in dominance_grids.items():
            optimal = next(r for r in result.rows if r.policy == "optimal")
            for row in result.rows:
                diffs = np.asarray(row.replication_delays) \
                    - np.asarray(optimal.replication_delays)
                se = float(diffs.std(ddof=1) / math.sqrt(diffs.size))
                if float(diffs.mean()) + 3.0 * se < 0.0:
                    violations.append((c, row.policy, float(diffs.mean()), se))
            details.append(f"C={c}: optimal {optimal.mean_delay:.3f}")
        ok = not violations
        report(4, ok, f"dominance over 6 policies x 3 sizes x 10 reps x 1e6 "
                      f"arrivals; {'; '.join(details)}; violations: "
                      f"{violations or 'none'}")
        assert not violations

    def test_simulated_optimal_matches_analytic(self, dominance_grids):
        scenario = Scenario()
        profiles = scenario.build_profiles()
        delays = scenario.delay_profile()
        worst = 0.0
        for c, result in dominance_grids.items():
            plan = optimal_policy(profiles, c, delays, "constant")
            analytic = optimal_delay_insensitive(profiles, plan.cached, delays)
            optimal = next(r for r in result.rows if r.policy == "optimal")
            worst = max(worst, abs(optimal.mean_delay - analytic) / analytic)
        ok = worst <= 0.02
        report(4, ok, f"simulated oracle within {worst:.3%} of closed form "
                      f"(tol 2%)")
        assert worst <= 0.02


class TestCriterion5CentralizedFigureShape:
    def test_small_cache_ordering(self, dominance_grids):
        rows = {r.policy: r.mean_delay for r in dominance_grids[100].rows}
        ok = rows["lru"] > rows["optimized-caching"] > rows["optimal"]
        report(5, ok, f"C=100 ordering lru {rows['lru']:.3f} > optimized-caching "
                      f"{rows['optimized-caching']:.3f} > optimal "
                      f"{rows['optimal']:.3f}")
        assert ok

    def test_planned_routing_meets_oracle_at_crossover(self):
        scenario = Scenario()
        profiles = scenario.build_profiles()
        delays = scenario.delay_profile()
        c_star = crossover_cache_size(profiles, delays, lo=300, hi=700)
        scenarios = [
            replace(s, seed=102, arrivals=1_000_000)
            for s in preset_centralized(cache_size=c_star)
            if s.policy in ("optimized-routing", "optimal")
        ]
        result = compare(scenarios, replications=5)
        routing = next(r for r in result.rows if r.policy == "optimized-routing")
        optimal = next(r for r in result.rows if r.policy == "optimal")
        rel = abs(routing.mean_delay - optimal.mean_delay) / optimal.mean_delay
        ok = rel <= 0.02
        report(5, ok, f"crossover C*={c_star}: planned routing "
                      f"{routing.mean_delay:.4f} vs oracle "
                      f"{optimal.mean_delay:.4f} ({rel:.3%}, tol 2%)")
        assert ok


class TestCriterion6ModelVersusSimulation:
    def test_alpha_sweep_probabilities(self):
        cache = TWO_LRU_CACHE_SIZE
        scenario = Scenario(name="sweep", seed=11, arrivals=1_000_000,
                            policy="alpha-two-lru", path="mm1",
                            cache_size=cache, alpha=0.0)
        rates = (scenario.user_rate * scenario.n_users
                 * zipf_popularity(scenario.file_count, scenario.zipf_skew))
        worst = 0.0
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            summary = run(replace(scenario, alpha=alpha)).summary
            model = alpha_two_lru_model(rates, cache, None, alpha)
            worst = max(worst,
                        abs(model.agg_hit - summary["hit_rate"]),
                        abs(model.agg_miss - summary["miss_rate"]),
                        abs(model.agg_deflect - summary["deflect_rate"]))
        ok = worst <= 0.05
        report(6, ok, f"two-stage cache model vs simulation, alpha sweep at "
                      f"C={cache}: worst abs gap {worst:.4f} (tol 0.05)")
        assert ok


class TestCriterion7CentralizedPolicyComparison:
    def test_tuned_variants_near_static_optimal(self):
        cache = TWO_LRU_CACHE_SIZE
        scenario = Scenario(cache_size=cache, path="mm1")
        profiles = scenario.build_profiles()
        rates = (scenario.user_rate * scenario.n_users
                 * zipf_popularity(scenario.file_count, scenario.zipf_skew))
        plan = optimal_policy(profiles, cache, scenario.delay_profile(), "mm1",
                              scenario.mu)
        static = optimal_delay_sensitive(profiles, plan.cached,
                                         scenario.hit_delay, scenario.miss_delay,
                                         scenario.mu, plan.split_p)
        alpha_star, d_alpha = optimize_alpha(rates, cache, None,
                                             scenario.hit_delay,
                                             scenario.miss_delay, scenario.mu)
        id_star, d_id = optimize_id_cache_size(rates, cache, scenario.hit_delay,
                                               scenario.miss_delay, scenario.mu)
        gap_alpha = d_alpha / static - 1.0
        gap_id = d_id / static - 1.0
        ok = d_id <= d_alpha and gap_alpha <= 0.10 and gap_id <= 0.10
        report(7, ok, f"C={cache}: static-optimal {static:.4f}; tuned forwarding "
                      f"alpha*={alpha_star:.3f} -> {d_alpha:.4f} ({gap_alpha:+.1%}); "
                      f"tuned id size {id_star} -> {d_id:.4f} ({gap_id:+.1%}); "
                      f"tolerance 10%, id variant must win")
        assert d_id <= d_alpha
        assert gap_alpha <= 0.10
        assert gap_id <= 0.10


def final_window_mean(result, tail_arrivals):
    need, total = tail_arrivals, 0.0
    for w in reversed(result.windows):
        take = min(w.arrivals, need)
        total += w.delay_sum * (take / w.arrivals)
        need -= take
        if need <= 0:
            break
    return total / tail_arrivals


class TestCriterion8DcrConvergence:
    @pytest.mark.parametrize("drift,tolerance", [(False, 0.10), (True, 0.15)])
    def test_final_window_close_to_oracle(self, drift, tolerance):
        base = Scenario(arrivals=1_000_000, path="constant", cache_size=200,
                        drift_enabled=drift)
        worst = 0.0
        for rep in range(3):
            seed = replication_seed(9, rep)
            dcr = run(replace(base, name="dcr", policy="dcr", seed=seed))
            opt = run(replace(base, name="opt", policy="optimal", seed=seed))
            ratio = final_window_mean(dcr, 100_000) / final_window_mean(opt, 100_000)
            worst = max(worst, ratio)
        ok = worst <= 1.0 + tolerance
        report(8, ok, f"{'drifting' if drift else 'static'} demand: worst "
                      f"final-window ratio {worst:.4f} over 3 seeds "
                      f"(tol {1 + tolerance:.2f})")
        assert ok


class TestCriterion9Determinism:
    @pytest.mark.parametrize("preset,args", [
        ("paper-centralized", ["--cache-size", "100"]),
        ("paper-dcr", ["--path", "mm1"]),
        ("paper-alpha-two-lru", []),
    ])
    def test_preset_rerun_byte_identical(self, preset, args, tmp_path):
        # determinism is budget-independent; a reduced budget keeps this quick
        outs = []
        for label in ("a", "b"):
            out = tmp_path / label
            code = main(["run", "--preset", preset, "--seed", "424242",
                         "--arrivals", "50000", "--out", str(out)] + args)
            assert code == 0
            outs.append(out)
        files_a = sorted(p.name for p in outs[0].glob("*.csv"))
        files_b = sorted(p.name for p in outs[1].glob("*.csv"))
        identical = files_a == files_b and all(
            (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
            for n in files_a)
        report(9, identical,
               f"preset {preset}: {len(files_a)} CSVs byte-identical on rerun")
        assert identical
