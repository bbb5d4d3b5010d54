import numpy as np
import pytest

from vehids.attacks import (
    AttackSchedule,
    AttackTargets,
    attack_actuator,
    attack_sensor,
    is_active,
)


class TestSchedule:
    def test_inactive_before_start(self):
        sched = AttackSchedule(start_s=20.0, pwm_period_s=2.0, pwm_duty=0.5)
        assert is_active(sched, 19.9) is False

    def test_pwm_phases(self):
        # period 2, duty 0.5: on for the first second of each period
        sched = AttackSchedule(start_s=20.0, pwm_period_s=2.0, pwm_duty=0.5)
        assert is_active(sched, 20.9) is True
        assert is_active(sched, 21.1) is False

    def test_full_duty_always_active_inside_window(self):
        sched = AttackSchedule(start_s=5.0, pwm_period_s=2.0, pwm_duty=1.0, end_s=15.0)
        for t in np.arange(5.0, 15.0, 0.05):
            assert is_active(sched, t)
        assert not is_active(sched, 15.0)

    def test_zero_duty_never_active(self):
        sched = AttackSchedule(start_s=5.0, pwm_period_s=2.0, pwm_duty=0.0, end_s=15.0)
        assert not any(is_active(sched, t) for t in np.arange(0.0, 20.0, 0.05))

    def test_periodicity_inside_window(self):
        sched = AttackSchedule(start_s=10.0, pwm_period_s=3.0, pwm_duty=0.4, end_s=100.0)
        rng = np.random.default_rng(0)
        for t in 10.0 + 80.0 * rng.random(200):
            assert is_active(sched, t) == is_active(sched, t + 3.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            is_active(AttackSchedule(), -0.1)

    def test_invalid_schedule_rejected(self):
        with pytest.raises(ValueError):
            AttackSchedule(pwm_duty=1.5)
        with pytest.raises(ValueError):
            AttackSchedule(start_s=30.0, end_s=20.0)
        with pytest.raises(ValueError):
            AttackSchedule(pwm_period_s=0.0)


class TestTargets:
    def test_out_of_range_index_rejected_at_construction(self):
        with pytest.raises(ValueError):
            AttackTargets(actuator_indices={4}, actuator_dim=3)
        with pytest.raises(ValueError):
            AttackTargets(sensor_indices={0})

    def test_empty_sets_allowed(self):
        targets = AttackTargets()
        assert targets.actuator_indices == frozenset()
        assert targets.sensor_indices == frozenset()


class TestMasking:
    def test_single_actuator_zeroed(self):
        targets = AttackTargets(actuator_indices={1}, actuator_dim=1)
        assert attack_actuator([0.7], targets, active=True).tolist() == [0.0]

    def test_selective_actuator_masking(self):
        targets = AttackTargets(actuator_indices={2}, actuator_dim=2)
        assert attack_actuator([0.7, 0.2], targets, active=True).tolist() == [0.7, 0.0]

    def test_inactive_is_identity(self):
        targets = AttackTargets(actuator_indices={1, 2, 3})
        vec = np.array([0.3, 0.5, -0.2])
        assert attack_actuator(vec, targets, active=False).tolist() == vec.tolist()

    def test_sensor_single_channel(self):
        targets = AttackTargets(sensor_indices={1})
        out = attack_sensor([1.2, 5.0, 0.1], targets, active=True)
        assert out.tolist() == [0.0, 5.0, 0.1]

    def test_sensor_blackout(self):
        targets = AttackTargets(sensor_indices={1, 2, 3})
        out = attack_sensor([1.2, 5.0, 0.1], targets, active=True)
        assert out.tolist() == [0.0, 0.0, 0.0]

    def test_sensor_inactive_identity(self):
        targets = AttackTargets(sensor_indices={1})
        out = attack_sensor([1.2, 5.0, 0.1], targets, active=False)
        assert out.tolist() == [1.2, 5.0, 0.1]

    def test_idempotent_when_active(self):
        rng = np.random.default_rng(1)
        targets = AttackTargets(actuator_indices={1, 3})
        for _ in range(20):
            vec = rng.normal(size=3)
            once = attack_actuator(vec, targets, active=True)
            twice = attack_actuator(once, targets, active=True)
            assert np.array_equal(once, twice)

    def test_untargeted_components_bitwise_unchanged(self):
        rng = np.random.default_rng(2)
        targets = AttackTargets(sensor_indices={2})
        for _ in range(20):
            vec = rng.normal(size=3)
            out = attack_sensor(vec, targets, active=True)
            assert out[0] == vec[0]
            assert out[2] == vec[2]

    def test_dimension_mismatch_rejected(self):
        targets = AttackTargets(actuator_indices={1})
        with pytest.raises(ValueError):
            attack_actuator([0.1, 0.2], targets, active=True)
