from dataclasses import replace

import numpy as np
import pytest

from cacheroute.path_models import UnstableQueueError
from cacheroute.sim_engine import (
    MetricsWindow,
    Scenario,
    compare,
    component_rng,
    replication_seed,
    run,
)


def small(policy="optimal", **kw):
    defaults = dict(name="t", seed=123, arrivals=20_000, window=5_000,
                    file_count=200, cache_size=40, policy=policy,
                    path="constant")
    defaults.update(kw)
    return Scenario(**defaults)


class TestSeeding:
    def test_component_streams_differ(self):
        a = component_rng(1, "workload").random(4)
        b = component_rng(1, "policy").random(4)
        assert not np.allclose(a, b)

    def test_component_streams_reproducible(self):
        assert np.array_equal(component_rng(5, "drift").random(8),
                              component_rng(5, "drift").random(8))

    def test_replication_seeds_distinct_and_stable(self):
        seeds = [replication_seed(9, r) for r in range(10)]
        assert len(set(seeds)) == 10
        assert seeds == [replication_seed(9, r) for r in range(10)]


class TestScenarioValidation:
    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            small(policy="belady").validate()

    def test_alpha_required_for_probabilistic_variant(self):
        with pytest.raises(ValueError):
            small(policy="alpha-two-lru").validate()

    def test_delay_ordering_enforced(self):
        with pytest.raises(ValueError):
            small(uncached_delay=0.5).validate()

    def test_mm1_service_window(self):
        small(path="mm1", mu=0.5).validate()
        with pytest.raises(ValueError):
            small(path="mm1", mu=2.0).validate()


class TestRun:
    def test_full_cache_gives_exact_hit_delay(self):
        result = run(small(cache_size=200, arrivals=5_000))
        assert result.mean_delay == 1.0
        assert result.summary["hit_rate"] == 1.0

    def test_same_seed_bit_identical(self):
        sc = small(policy="dcr", collect_records=True, arrivals=10_000)
        a, b = run(sc), run(sc)
        assert a.records == b.records
        assert a.windows == b.windows
        assert a.summary["mean_delay"] == b.summary["mean_delay"]

    def test_policy_change_keeps_request_stream(self):
        # policy coins draw from their own stream: the (arrival, user, file)
        # sequence must be identical across policies under one seed
        recs = {}
        for policy in ("optimal", "lru", "dcr"):
            sc = small(policy=policy, collect_records=True, arrivals=5_000)
            recs[policy] = [(r.arrival, r.user, r.file_id)
                            for r in run(sc).records]
        assert recs["optimal"] == recs["lru"] == recs["dcr"]

    def test_conservation_and_window_bookkeeping(self):
        for policy in ("lru", "optimal", "dcr"):
            result = run(small(policy=policy))
            total = 0
            for w in result.windows:
                assert w.hits + w.misses + w.deflects + w.uncached == w.arrivals
                total += w.arrivals
            assert total == 20_000
            last = result.windows[-1]
            assert last.cum_hits + last.cum_misses + last.cum_deflects \
                + last.cum_uncached == 20_000
            assert result.summary["hit_rate"] + result.summary["miss_rate"] \
                + result.summary["deflect_rate"] \
                + result.summary["uncached_rate"] == pytest.approx(1.0)

    def test_delay_accounting_constant_path(self):
        sc = small(policy="optimized-routing", collect_records=True,
                   hit_delay=1.0, miss_delay=8.0, uncached_delay=5.0)
        result = run(sc)
        expected = {"hit": 1.0, "miss": 8.0, "uncached": 5.0}
        seen = set()
        for rec in result.records:
            assert rec.delay == expected[rec.outcome]
            seen.add(rec.outcome)
        assert seen == {"hit", "miss", "uncached"}

    def test_delay_accounting_mm1_path(self):
        sc = small(policy="alpha-two-lru", alpha=0.5, path="mm1", mu=0.5,
                   collect_records=True, cache_size=60)
        result = run(sc)
        kinds = {r.outcome for r in result.records}
        assert "deflect" in kinds
        for rec in result.records:
            if rec.outcome == "deflect":
                assert rec.delay > 0.0
            elif rec.outcome == "hit":
                assert rec.delay == 1.0
            else:
                assert rec.delay == 8.0

    def test_windows_match_record_recomputation(self):
        sc = small(policy="lru", collect_records=True, arrivals=12_000,
                   window=5_000)
        result = run(sc)
        assert [w.arrivals for w in result.windows] == [5_000, 5_000, 2_000]
        first = result.records[:5_000]
        w0 = result.windows[0]
        assert w0.delay_sum == pytest.approx(sum(r.delay for r in first))
        assert w0.hits == sum(r.outcome == "hit" for r in first)
        assert w0.mean_delay == pytest.approx(w0.delay_sum / 5_000)

    def test_dcr_records_carry_phase(self):
        sc = small(policy="dcr", collect_records=True, arrivals=6_000,
                   caching_phase_arrivals=2_000)
        result = run(sc)
        phases = [r.phase for r in result.records]
        assert phases[0] == "caching"
        assert phases[-1] == "routing"

    def test_drift_changes_request_stream_only_via_drift_stream(self):
        base = small(policy="optimal", collect_records=True, arrivals=5_000)
        still = run(replace(base, drift_enabled=False))
        drifted = run(replace(base, drift_enabled=True, drift_probability=0.5))
        assert [r.arrival for r in still.records] == \
            [r.arrival for r in drifted.records]
        files_differ = any(a.file_id != b.file_id
                           for a, b in zip(still.records, drifted.records))
        assert files_differ

    def test_every_policy_runs_and_conserves(self):
        for policy, kw in [("optimized-caching", {}),
                           ("dcor", {}),
                           ("two-lru", {"path": "mm1", "mu": 0.5}),
                           ("alpha-two-lru", {"path": "mm1", "mu": 0.5,
                                              "alpha": 0.3})]:
            result = run(small(policy=policy, arrivals=8_000, **kw))
            s = result.summary
            assert s["hit_rate"] + s["miss_rate"] + s["deflect_rate"] \
                + s["uncached_rate"] == pytest.approx(1.0)
            if policy.endswith("two-lru"):
                assert s["deflect_rate"] > 0.0
            else:
                assert s["deflect_rate"] == 0.0

    def test_unstable_queue_aborts(self):
        # heavy deflection against a slow server: backlog grows without bound
        sc = small(policy="alpha-two-lru", alpha=0.0, path="mm1", mu=0.15,
                   cache_size=20, window=2_000, arrivals=100_000)
        with pytest.raises(UnstableQueueError):
            run(sc)


class TestCompare:
    def test_undeclared_dimension_rejected(self):
        a = small(policy="lru")
        b = small(policy="optimal", miss_delay=9.0)
        with pytest.raises(ValueError):
            compare([a, b], replications=2, parallel=False)

    def test_paired_and_reproducible(self):
        scenarios = [small(policy="lru", name="lru"),
                     small(policy="optimal", name="opt")]
        r1 = compare(scenarios, replications=3, parallel=False)
        r2 = compare(scenarios, replications=3, parallel=True)
        assert [row.replication_delays for row in r1.rows] == \
            [row.replication_delays for row in r2.rows]
        assert r1.rows[0].policy == "lru"
        assert r1.rows[0].stderr >= 0.0

    def test_optimal_monotone_in_cache_size(self):
        rows = []
        for c in (20, 60, 120):
            res = compare([small(policy="optimal", cache_size=c)],
                          replications=2, parallel=False)
            rows.append(res.rows[0].mean_delay)
        assert rows[0] >= rows[1] >= rows[2]


class TestMetricsWindow:
    def test_rates_and_means(self):
        w = MetricsWindow(end_arrivals=100, arrivals=50, delay_sum=100.0,
                          hits=20, misses=10, deflects=5, uncached=15,
                          cum_delay_sum=300.0, cum_hits=40, cum_misses=20,
                          cum_deflects=10, cum_uncached=30)
        assert w.window_mean_delay == 2.0
        assert w.mean_delay == 3.0
        assert w.rates()["hit_rate"] == 0.4
