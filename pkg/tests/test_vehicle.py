import numpy as np
import pytest

from vehids.vehicle import (
    ControlCommand,
    GRAVITY_MPS2,
    Measurement,
    RunLog,
    Scenario,
    VehicleParams,
    VehicleState,
    equilibrium_control,
    generate_scenario,
    measure,
    resistance_force_n,
    run_log,
    step,
    traction_accel_mps2,
    unify_control,
)


@pytest.fixture
def params():
    return VehicleParams()


class TestStep:
    def test_equilibrium_at_calibration_point(self, params):
        # drag + roll at 15 m/s is 340.5 N; matching traction gives zero accel
        state = VehicleState(speed_mps=15.0)
        assert resistance_force_n(params, 15.0) == pytest.approx(340.5, abs=1e-9)
        u_star = equilibrium_control(params, 15.0)
        a_f = traction_accel_mps2(params, u_star)
        assert a_f * params.mass_kg == pytest.approx(340.5, abs=1e-9)
        throttle = 2.0 * u_star - 1.0
        nxt = step(params, state, ControlCommand(throttle=throttle))
        assert nxt.accel_mps2 == pytest.approx(0.0, abs=1e-9)

    def test_rest_stays_at_rest_with_neutral_command(self, params):
        state = VehicleState(speed_mps=0.0)
        nxt = step(params, state, ControlCommand())  # u = 0.5, a_f = 0
        assert nxt.accel_mps2 == 0.0
        assert nxt.speed_mps == 0.0

    def test_accel_matches_hand_evaluation_at_10mps(self, params):
        # independent scalar evaluation of traction minus the resistance sum
        v = 10.0
        cmd = ControlCommand(throttle=0.4, brake=0.0, steer=0.0)
        u = (0.4 - 0.0 + 1.0) / 2.0
        a_f = params.traction_max_mps2 * (2.0 * u - 1.0)
        resistance = (params.air_drag_coeff * v**2
                      + params.roll_coeff * v
                      + params.mass_kg * GRAVITY_MPS2 * np.sin(params.grade_angle_rad))
        expected = a_f - resistance / params.mass_kg
        nxt = step(params, VehicleState(speed_mps=v), cmd)
        assert nxt.accel_mps2 == pytest.approx(expected, rel=1e-12)
        assert nxt.speed_mps == pytest.approx(v + expected * params.dt_s, rel=1e-12)

    def test_time_advances_by_dt(self, params):
        state = VehicleState(speed_mps=5.0, time_s=1.0)
        assert step(params, state, ControlCommand()).time_s == pytest.approx(1.05)

    def test_full_brake_speed_non_increasing_until_zero(self, params):
        state = VehicleState(speed_mps=20.0)
        speeds = [state.speed_mps]
        for _ in range(300):
            state = step(params, state, ControlCommand(brake=1.0))
            speeds.append(state.speed_mps)
        diffs = np.diff(speeds)
        assert np.all(diffs <= 0.0)
        assert speeds[-1] == 0.0

    def test_equilibrium_exists_for_any_speed(self, params):
        for v_star in (0.5, 3.0, 10.0, 15.0, 25.0):
            u_star = equilibrium_control(params, v_star)
            throttle = 2.0 * u_star - 1.0
            nxt = step(params, VehicleState(speed_mps=v_star), ControlCommand(throttle=throttle))
            assert abs(nxt.accel_mps2) < 1e-9
            assert abs(nxt.speed_mps - v_star) < 1e-9 * params.dt_s

    def test_resistance_decomposes_into_three_parts(self):
        params = VehicleParams(grade_angle_rad=0.03)
        for v in (0.0, 1.0, 7.3, 15.0, 33.3):
            air = params.air_drag_coeff * v**2
            roll = params.roll_coeff * v
            grade = params.mass_kg * GRAVITY_MPS2 * np.sin(params.grade_angle_rad)
            total = resistance_force_n(params, v)
            assert total == pytest.approx(air + roll + grade, rel=1e-12)

    def test_yaw_rate_relaxes_toward_steer_target(self, params):
        state = VehicleState(speed_mps=10.0)
        cmd = ControlCommand(throttle=0.1, steer=0.5)
        for _ in range(200):
            state = step(params, state, cmd)
        target = params.steer_gain * 0.5 * state.speed_mps
        assert state.yaw_rate_rps == pytest.approx(target, rel=0.05)


class TestParamsValidation:
    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            VehicleParams(mass_kg=0.0)

    def test_rejects_negative_coefficients(self):
        with pytest.raises(ValueError):
            VehicleParams(air_drag_coeff=-1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            VehicleParams(dt_s=0.0)

    def test_command_range_checks(self):
        with pytest.raises(ValueError):
            ControlCommand(throttle=1.2)
        with pytest.raises(ValueError):
            ControlCommand(brake=-0.1)
        with pytest.raises(ValueError):
            ControlCommand(steer=1.5)


class TestUnifyControl:
    def test_full_throttle_is_one(self):
        assert unify_control(1.0, 0.0) == 1.0

    def test_full_brake_is_zero(self):
        assert unify_control(0.0, 1.0) == 0.0

    def test_neutral_is_half(self):
        assert unify_control(0.0, 0.0) == 0.5

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            unify_control(1.1, 0.0)
        with pytest.raises(ValueError):
            unify_control(0.0, -0.2)


class TestMeasure:
    def test_identity_at_zero_noise(self):
        state = VehicleState(speed_mps=5.0, yaw_rate_rps=0.1, accel_mps2=1.2)
        y = measure(state, (0.0, 0.0, 0.0), np.random.default_rng(0))
        assert y.as_vector().tolist() == [1.2, 5.0, 0.1]

    def test_bit_reproducible_with_fixed_seed(self):
        state = VehicleState(speed_mps=5.0)
        a = measure(state, (0.1, 0.1, 0.01), np.random.default_rng(42)).as_vector()
        b = measure(state, (0.1, 0.1, 0.01), np.random.default_rng(42)).as_vector()
        assert np.array_equal(a, b)

    def test_sample_std_matches_requested_noise(self):
        state = VehicleState(speed_mps=5.0)
        rng = np.random.default_rng(7)
        accel = np.array([
            measure(state, (0.1, 0.0, 0.0), rng).accel_mps2 for _ in range(10_000)
        ])
        assert np.std(accel) == pytest.approx(0.1, rel=0.05)

    def test_rejects_negative_noise(self):
        with pytest.raises(ValueError):
            measure(VehicleState(), (-0.1, 0.0, 0.0), np.random.default_rng(0))


class TestScenario:
    def test_same_seed_same_scenario(self):
        a = generate_scenario(3, 30.0, "aggressive")
        b = generate_scenario(3, 30.0, "aggressive")
        assert a == b

    def test_cruise_throttle_variance_below_aggressive(self):
        times = np.arange(0.0, 60.0, 0.05)
        def throttle_var(style):
            scenario = generate_scenario(11, 60.0, style)
            return np.var([scenario.command_at(t).throttle for t in times])
        assert throttle_var("cruise") < throttle_var("aggressive")

    def test_commands_within_bounds(self):
        for style in ("cruise", "stop_and_go", "aggressive"):
            scenario = generate_scenario(5, 60.0, style)
            for t in np.arange(0.0, 60.0, 0.05):
                cmd = scenario.command_at(t)
                assert 0.0 <= cmd.throttle <= 1.0
                assert 0.0 <= cmd.brake <= 1.0
                assert -1.0 <= cmd.steer <= 1.0

    def test_no_simultaneous_high_throttle_and_brake(self):
        for style in ("cruise", "stop_and_go", "aggressive"):
            scenario = generate_scenario(9, 60.0, style)
            for t in np.arange(0.0, 60.0, 0.05):
                cmd = scenario.command_at(t)
                assert min(cmd.throttle, cmd.brake) < 0.5

    def test_rejects_unknown_style(self):
        with pytest.raises(ValueError):
            generate_scenario(0, 10.0, "drifting")

    def test_rejects_nonmonotone_keyframes(self):
        with pytest.raises(ValueError):
            Scenario(duration_s=10.0, seed=0,
                     keyframes=((0.0, ControlCommand()), (0.0, ControlCommand())))


class TestRunLog:
    def test_record_count(self, params):
        scenario = generate_scenario(1, 20.0, "cruise")
        assert len(run_log(params, scenario)) == 400

    def test_replaying_commands_reproduces_states_exactly(self, params):
        scenario = generate_scenario(2, 10.0, "stop_and_go")
        log = run_log(params, scenario)
        state = VehicleState(speed_mps=log.speed[0], yaw_rate_rps=log.yaw_rate[0],
                             accel_mps2=log.accel[0], time_s=0.0)
        for k in range(len(log) - 1):
            cmd = ControlCommand(throttle=log.throttle[k], brake=log.brake[k],
                                 steer=log.steer[k])
            state = step(params, state, cmd)
            assert state.speed_mps == log.speed[k + 1]
            assert state.yaw_rate_rps == log.yaw_rate[k + 1]
            assert state.accel_mps2 == log.accel[k + 1]

    def test_identical_seeds_give_bit_identical_logs(self, params):
        scenario = generate_scenario(4, 15.0, "aggressive")
        a = run_log(params, scenario)
        b = run_log(params, scenario)
        assert np.array_equal(a.meas, b.meas)
        assert np.array_equal(a.speed, b.speed)

    def test_too_short_scenario_rejected(self, params):
        scenario = generate_scenario(0, 0.05, "cruise")
        with pytest.raises(ValueError):
            run_log(params, scenario)

    def test_csv_roundtrip(self, params, tmp_path):
        scenario = generate_scenario(6, 5.0, "cruise")
        log = run_log(params, scenario)
        path = tmp_path / "sim_log.csv"
        log.write_csv(path)
        back = RunLog.read_csv(path)
        assert np.array_equal(back.speed, log.speed)
        assert np.array_equal(back.meas, log.meas)
        assert np.array_equal(back.u, log.u)
