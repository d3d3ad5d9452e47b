import math

import numpy as np
import pytest

from uavkit.absolute import KinematicAiding, ReferencePair, extract_gravity
from uavkit.attitude import GRAVITY, BodyRates, Quaternion, euler_to_dcm, quat_angle_between
from uavkit.errors import FormatError, InvalidInputError
from uavkit.filtering import FilterSpec, ImuConditioner
from uavkit.geo import LocalTangentPlane
from uavkit.sim import (
    Segment,
    SensorErrorModel,
    SensorRecord,
    dumps_record,
    generate_trajectory,
    read_sensor_log,
    simulate_sensors,
    write_sensor_log,
)

MIXED = [
    Segment.straight(5, 20),
    Segment.turn(10, 0.15),
    Segment.climb(5, 3),
    Segment.hold(3),
    Segment.straight(5, 25),
]


@pytest.fixture(scope="module")
def mixed_truth():
    return generate_trajectory(MIXED)


class TestTrajectory:
    def test_empty_segment_list(self):
        with pytest.raises(InvalidInputError):
            generate_trajectory([])

    def test_bad_segment(self):
        with pytest.raises(InvalidInputError):
            Segment("loop", 3.0)
        with pytest.raises(InvalidInputError):
            Segment.straight(0.0)

    def test_straight_level(self):
        truth = generate_trajectory([Segment.straight(10.04, 20)], initial_position_ned=(0, 0, 0))
        assert len(truth) == 2510
        last = truth[2500]
        assert last.t_s == pytest.approx(10.0)
        assert last.position_ned == pytest.approx([200.0, 0.0, 0.0], abs=1e-9)
        for s in truth[::250]:
            assert quat_angle_between(s.attitude, Quaternion.identity()) < 1e-12

    def test_turn_radius(self):
        truth = generate_trajectory([Segment.turn(80, 0.1, 30)], initial_speed_mps=30, transition_s=0.0)
        pos = np.array([s.position_ned[:2] for s in truth])
        # centre of the circle: 300 m to the right of the initial northbound track
        r = np.hypot(pos[:, 0] - 0.0, pos[:, 1] - 300.0)
        assert np.max(np.abs(r - 300.0)) < 1.0

    def test_coordinated_turn_specific_force_has_no_side_component(self):
        truth = generate_trajectory([Segment.turn(20, 0.12, 25)], initial_speed_mps=25, transition_s=0.0)
        s = truth[1000]
        C = euler_to_dcm(s.euler)
        f = s.a_dynamic + np.cross(s.rates.as_array(), s.velocity_body) - C.T @ [0, 0, GRAVITY]
        assert abs(f[1]) < 1e-9

    def test_velocity_derivative_matches_dynamic_acceleration(self, mixed_truth):
        # d(v_ned)/dt by central difference versus C (a_dynamic + w x v_body)
        dt = 1.0 / 250.0
        worst = 0.0
        for k in range(1, len(mixed_truth) - 1):
            prev, s, nxt = mixed_truth[k - 1], mixed_truth[k], mixed_truth[k + 1]
            fd = (nxt.velocity_ned - prev.velocity_ned) / (2 * dt)
            C = euler_to_dcm(s.euler)
            model = C @ (s.a_dynamic + np.cross(s.rates.as_array(), s.velocity_body))
            worst = max(worst, np.max(np.abs(fd - model)))
        assert worst < 1e-3

    def test_attitude_integrates_body_rates(self, mixed_truth):
        # one exact rotation step with the mean rate over each interval
        dt = 1.0 / 250.0
        worst = 0.0
        for a, b in zip(mixed_truth[:-1], mixed_truth[1:]):
            w = 0.5 * (a.rates.as_array() + b.rates.as_array())
            ang = np.linalg.norm(w) * dt
            axis = w / np.linalg.norm(w) if ang > 0 else np.zeros(3)
            step = Quaternion(math.cos(ang / 2), *(math.sin(ang / 2) * axis))
            worst = max(worst, quat_angle_between(a.attitude * step, b.attitude))
        assert worst < 1e-6

    def test_position_integrates_velocity(self, mixed_truth):
        dt = 1.0 / 250.0
        for a, b in zip(mixed_truth[:-1:50], mixed_truth[1::50]):
            step = b.position_ned - a.position_ned
            assert step == pytest.approx(0.5 * dt * (a.velocity_ned + b.velocity_ned), abs=1e-6)


class TestSensors:
    def test_static_level_is_pure_gravity(self):
        truth = generate_trajectory([Segment.hold(2)], initial_speed_mps=0.0)
        log = simulate_sensors(truth, SensorErrorModel.ideal())
        for rec in log:
            if rec.kind == "imu":
                assert rec.acc == pytest.approx((0.0, 0.0, -GRAVITY), abs=1e-12)
                assert rec.gyro == (0.0, 0.0, 0.0)

    def test_rates(self):
        truth = generate_trajectory([Segment.straight(10)])
        log = simulate_sensors(truth, SensorErrorModel.realistic())
        counts = {k: sum(r.kind == k for r in log) for k in ("imu", "mag", "gps")}
        assert counts == {"imu": 2500, "mag": 500, "gps": 40}
        gps_t = [r.t_s for r in log if r.kind == "gps"]
        assert gps_t == pytest.approx([j * 0.25 for j in range(40)])

    def test_ties_are_ordered_imu_mag_gps(self):
        log = simulate_sensors(generate_trajectory([Segment.straight(1)]))
        assert [r.kind for r in log[:3]] == ["imu", "mag", "gps"]
        assert all(a.t_s <= b.t_s for a, b in zip(log, log[1:]))

    def test_same_seed_is_byte_identical(self, tmp_path):
        truth = generate_trajectory([Segment.straight(3), Segment.turn(3, 0.1)])
        paths = []
        for i in range(2):
            p = tmp_path / f"run{i}.jsonl"
            write_sensor_log(simulate_sensors(truth, SensorErrorModel.realistic(seed=7)), p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()
        other = tmp_path / "other.jsonl"
        write_sensor_log(simulate_sensors(truth, SensorErrorModel.realistic(seed=8)), other)
        assert other.read_bytes() != paths[0].read_bytes()

    def test_extract_gravity_inverts_the_accelerometer_model(self, mixed_truth):
        log = simulate_sensors(mixed_truth, SensorErrorModel.ideal())
        imu = [r for r in log if r.kind == "imu"]
        for s, rec in zip(mixed_truth[::37], imu[::37]):
            aid = KinematicAiding(s.rates, tuple(s.velocity_body), tuple(s.a_dynamic))
            g = extract_gravity(rec.acc, aid).as_array()
            g_true = euler_to_dcm(s.euler).T @ [0.0, 0.0, GRAVITY]
            assert np.max(np.abs(g - g_true)) < 1e-9

    def test_magnetometer_is_rotated_reference(self, mixed_truth):
        ref = ReferencePair.from_field(inclination_deg=-30, declination_deg=1.5)
        log = simulate_sensors(mixed_truth, SensorErrorModel.ideal(), ref=ref)
        mags = [r for r in log if r.kind == "mag"]
        for k, rec in enumerate(mags[::20]):
            s = mixed_truth[k * 20 * 5]
            assert rec.t_s == s.t_s
            assert np.allclose(rec.mag, euler_to_dcm(s.euler).T @ ref.m_R, atol=1e-12)

    def test_gps_matches_truth_through_ltp(self, mixed_truth):
        ltp = LocalTangentPlane(10.0, 20.0, 5.0)
        log = simulate_sensors(mixed_truth, SensorErrorModel.ideal(), ltp=ltp)
        for rec in [r for r in log if r.kind == "gps"][::10]:
            s = mixed_truth[round(rec.t_s * 250)]
            assert ltp.to_ned(rec.lat_deg, rec.lon_deg, rec.alt_m) == pytest.approx(tuple(s.position_ned), abs=1e-6)
            assert rec.vel_ned == pytest.approx(tuple(s.velocity_ned), abs=1e-12)

    def test_noise_statistics(self):
        truth = generate_trajectory([Segment.hold(40.0)], initial_speed_mps=0.0)
        err = SensorErrorModel(
            gyro_noise_rps=0.01, accel_noise_mps2=0.2, mag_noise=0.003, vibration_amp_mps2=0.0, seed=3
        )
        log = simulate_sensors(truth, err)
        imu = [r for r in log if r.kind == "imu"]
        mag = np.array([r.mag for r in log if r.kind == "mag"])
        gyro = np.array([r.gyro for r in imu])
        acc = np.array([r.acc for r in imu]) - [0.0, 0.0, -GRAVITY]
        assert len(imu) == 10_000
        for axis in range(3):
            assert np.std(gyro[:, axis]) == pytest.approx(0.01, rel=0.05)
            assert np.std(acc[:, axis]) == pytest.approx(0.2, rel=0.05)
        # 2000 mag samples: a looser band that still rejects a wrong sigma
        assert np.std(mag - ReferencePair().m_R) == pytest.approx(0.003, rel=0.05)

    def test_gyro_bias_is_constant_offset(self):
        truth = generate_trajectory([Segment.hold(1.0)], initial_speed_mps=0.0)
        log = simulate_sensors(truth, SensorErrorModel(gyro_bias_rps=(0.01, -0.02, 0.03), vibration_amp_mps2=0))
        for rec in log:
            if rec.kind == "imu":
                assert rec.gyro == pytest.approx((0.01, -0.02, 0.03), abs=1e-15)

    def test_vibration_is_rejected_by_conditioner(self):
        truth = generate_trajectory([Segment.hold(4.0)], initial_speed_mps=0.0)
        log = simulate_sensors(truth, SensorErrorModel(vibration_amp_mps2=5.0))
        cond = ImuConditioner(FilterSpec(5.0, 250.0))
        residual = []
        for rec in log:
            if rec.kind == "imu":
                acc, _ = cond.step(rec.acc, rec.gyro)
                residual.append(acc - [0.0, 0.0, -GRAVITY])
        peak = np.max(np.abs(np.array(residual)[500:]))
        assert 20 * math.log10(5.0 / peak) >= 20.0

    def test_negative_sigma_rejected(self):
        with pytest.raises(InvalidInputError):
            SensorErrorModel(gyro_noise_rps=-1.0)


class TestJsonLines:
    def test_round_trip(self, tmp_path):
        truth = generate_trajectory([Segment.turn(2, 0.1)])
        log = simulate_sensors(truth, SensorErrorModel.realistic(seed=1))
        p = tmp_path / "s.jsonl"
        write_sensor_log(log, p)
        back = read_sensor_log(p)
        assert back == log

    def test_record_shapes(self):
        assert dumps_record(SensorRecord(0.5, "mag", mag=(1.0, 0.0, 0.5))) == '{"t_s":0.5,"kind":"mag","mag":[1.0,0.0,0.5]}'
        gps = SensorRecord(0.25, "gps", lat_deg=1.0, lon_deg=2.0, alt_m=3.0, vel_ned=(1.0, 2.0, 3.0))
        assert SensorRecord.from_dict(gps.to_dict()) == gps

    @pytest.mark.parametrize(
        "bad",
        [
            "not json",
            '{"t_s":0.1,"kind":"imu","acc":[1,2],"gyro":[0,0,0]}',
            '{"t_s":0.1,"kind":"baro"}',
            '{"kind":"mag","mag":[1,0,0]}',
            "[1,2,3]",
            '{"t_s":NaN,"kind":"mag","mag":[1,0,0]}',
        ],
    )
    def test_malformed_line_reports_line_number(self, tmp_path, bad):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"t_s":0.0,"kind":"mag","mag":[1,0,0]}\n' + bad + "\n")
        with pytest.raises(FormatError) as info:
            read_sensor_log(p)
        assert info.value.line == 2
        assert "2" in str(info.value)
