import numpy as np
import pytest

from cacheroute.path_models import (
    DelayProfile,
    Mm1Config,
    Mm1Queue,
    UnstableQueueError,
    constant_path_delay,
    mm1_expected_delay,
    simulate_mm1,
)


class FixedServiceRng:
    """Stub generator handing out preset service durations."""

    def __init__(self, values):
        self.values = list(values)

    def exponential(self, scale, size):
        out = (self.values + [scale] * size)[:size]
        self.values = self.values[size:]
        return np.asarray(out)


class TestExpectedDelay:
    def test_empty_queue_is_mean_service_time(self):
        assert mm1_expected_delay(0.5, 0.0) == 2.0

    def test_half_loaded(self):
        assert mm1_expected_delay(0.5, 0.25) == 4.0

    def test_saturation_raises(self):
        with pytest.raises(UnstableQueueError):
            mm1_expected_delay(0.5, 0.5)
        with pytest.raises(UnstableQueueError):
            mm1_expected_delay(0.5, 0.7)
        with pytest.raises(ValueError):
            mm1_expected_delay(0.5, -0.1)


class TestQueueEvents:
    def test_single_job(self):
        q = Mm1Queue(0.5, FixedServiceRng([3.0]))
        assert q.submit(0.0) == 3.0

    def test_fifo_wait(self):
        q = Mm1Queue(0.5, FixedServiceRng([5.0, 1.0]))
        assert q.submit(0.0) == 5.0
        dep = q.submit(1.0)
        assert dep == 6.0 and dep - 1.0 == 5.0

    def test_out_of_order_rejected(self):
        q = Mm1Queue(0.5, FixedServiceRng([1.0, 1.0]))
        q.submit(5.0)
        with pytest.raises(ValueError):
            q.submit(4.0)

    def test_matches_lindley_recursion(self):
        # FIFO oracle: departure = max(arrival, previous departure) + service
        rng = np.random.default_rng(3)
        arrivals = np.cumsum(rng.exponential(4.0, 2000))
        services = rng.exponential(2.0, 2000)
        q = Mm1Queue(0.5, FixedServiceRng(services.tolist()))
        expected_dep = 0.0
        for a, s in zip(arrivals.tolist(), services.tolist()):
            expected_dep = max(a, expected_dep) + s
            assert q.submit(a) == pytest.approx(expected_dep, rel=1e-12)
        assert q.jobs == 2000

    def test_departures_nondecreasing_and_conserving(self):
        rng = np.random.default_rng(9)
        q = Mm1Queue(0.8, np.random.default_rng(10))
        arrivals = np.cumsum(rng.exponential(2.0, 5000))
        last = 0.0
        for a in arrivals.tolist():
            dep = q.submit(a)
            assert dep >= last and dep > a
            last = dep
        assert q.jobs == 5000


class TestSimulateMm1:
    @pytest.mark.parametrize("lam", [0.1, 0.25])
    def test_mean_sojourn_converges(self, lam):
        stats = simulate_mm1(0.5, lam, 100_000, seed=2024)
        expected = mm1_expected_delay(0.5, lam)
        assert stats.mean_sojourn == pytest.approx(expected, rel=0.05)

    def test_utilization_tracks_offered_load(self):
        stats = simulate_mm1(0.5, 0.25, 100_000, seed=77)
        assert stats.utilization == pytest.approx(0.5, rel=0.02)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            simulate_mm1(0.5, 0.0, 10, seed=0)


class TestDelayProfile:
    def test_homogeneous_accessor(self):
        prof = DelayProfile.homogeneous(1.0, 8.0, 5.0, 3)
        assert prof.n_users == 3
        assert constant_path_delay(prof, 1) == 5.0
        prof.validate_constant_path()

    def test_per_user_values(self):
        prof = DelayProfile(np.array([1.0, 2.0]), np.array([8.0, 9.0]),
                            np.array([5.0, 6.0]))
        assert constant_path_delay(prof, 0) == 5.0
        assert constant_path_delay(prof, 1) == 6.0
        prof.validate_constant_path()

    def test_constant_path_ordering_enforced(self):
        bad = DelayProfile.homogeneous(5.0, 8.0, 1.0, 2)
        with pytest.raises(ValueError):
            bad.validate_constant_path()

    def test_mm1_ordering_enforced(self):
        prof = DelayProfile.homogeneous(1.0, 8.0, 5.0, 2)
        prof.validate_mm1_path(0.5)  # 1 < 2 < 8
        with pytest.raises(ValueError):
            prof.validate_mm1_path(2.0)  # mean service 0.5 below hit delay
        hetero = DelayProfile(np.array([1.0, 1.5]), np.array([8.0, 8.0]),
                              np.array([5.0, 5.0]))
        with pytest.raises(ValueError):
            hetero.validate_mm1_path(0.5)

    def test_mm1_config_positive(self):
        Mm1Config(0.5)
        with pytest.raises(ValueError):
            Mm1Config(0.0)
