import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavkit.attitude import wrap_angle
from uavkit.autopilot import (
    TRAJECTORY_CSV_HEADER,
    AutopilotGains,
    ControlOutputs,
    KinematicAircraft,
    PidController,
    Waypoint,
    pid_step,
    sequencer_step,
    simulate_mission,
    write_report_json,
    write_trajectory_csv,
)
from uavkit.errors import InvalidInputError, PlanError
from uavkit.geo import LocalTangentPlane

LTP = LocalTangentPlane()


def _wp(n, e, alt=100.0, kind="nav"):
    return Waypoint.from_ned(LTP, n, e, alt, kind)


def _aircraft(n=0.0, e=0.0, alt=100.0, heading=0.0, speed=20.0, wind=(0.0, 0.0, 0.0)):
    return KinematicAircraft(position_ned=np.array([n, e, -alt]), heading_rad=heading, airspeed_mps=speed, wind_ned=wind)


@pytest.fixture(scope="module")
def square():
    plan = [_wp(1000, 0), _wp(1000, 1000), _wp(0, 1000), _wp(0, 0)]
    return plan, simulate_mission(plan, model=_aircraft(-200.0), ltp=LTP, timeout_s=600)


class TestTypes:
    @pytest.mark.parametrize("lat,lon,alt", [(91, 0, 0), (0, 180, 0), (0, 0, -1), (math.nan, 0, 0)])
    def test_waypoint_validation(self, lat, lon, alt):
        with pytest.raises(InvalidInputError):
            Waypoint(lat, lon, alt)

    def test_control_ranges(self):
        with pytest.raises(InvalidInputError):
            ControlOutputs(1.5, 0, 0, 0.5)
        with pytest.raises(InvalidInputError):
            ControlOutputs(0, 0, 0, -0.1)

    def test_gains_from_dict(self):
        g = AutopilotGains.from_dict({"course_kp": 0.8, "arrival_radius_m": 40})
        assert g.course_kp == 0.8 and g.arrival_radius_m == 40.0
        with pytest.raises(InvalidInputError):
            AutopilotGains.from_dict({"course_gain": 1})

    def test_stall_floor(self):
        with pytest.raises(InvalidInputError):
            KinematicAircraft(airspeed_mps=5.0)


class TestPid:
    def test_proportional_only(self):
        c = PidController(kp=0.5, out_min=-1, out_max=1)
        assert pid_step(c, 1.0, 0.2, 0.02) == pytest.approx(0.4)
        assert pid_step(c, 10.0, 0.0, 0.02) == 1.0

    def test_zero_error_gives_zero(self):
        c = PidController(1.0, 0.5, 0.1)
        assert all(pid_step(c, 3.0, 3.0, 0.02) == 0.0 for _ in range(100))

    def test_anti_windup_trace(self):
        # oracle: the integrator is a clamped running sum of e*dt
        c = PidController(kp=2.0, ki=1.0, i_min=-0.3, i_max=0.3)
        expected_i = 0.0
        for _ in range(100):
            out = pid_step(c, 5.0, 0.0, 0.02)
            expected_i = min(0.3, expected_i + 5.0 * 0.02)
            assert c.integrator == pytest.approx(expected_i)
            assert out == 1.0
        assert c.integrator == 0.3
        # unwinds as soon as the error reverses
        pid_step(c, -5.0, 0.0, 0.02)
        assert c.integrator == pytest.approx(0.2)

    def test_derivative(self):
        c = PidController(kp=0.0, kd=1.0, out_min=-100, out_max=100)
        assert pid_step(c, 0.0, 0.0, 0.1) == 0.0
        assert pid_step(c, 1.0, 0.0, 0.1) == pytest.approx(10.0)

    def test_wrapped_error(self):
        c = PidController(kp=1.0, out_min=-10, out_max=10, wrap=True)
        assert pid_step(c, math.radians(179), math.radians(-179), 0.02) == pytest.approx(math.radians(-2))

    def test_bad_dt(self):
        with pytest.raises(InvalidInputError):
            pid_step(PidController(1.0), 0, 0, 0.0)


class TestSequencer:
    def test_due_north(self):
        obj, cursor = sequencer_step(_aircraft(), [_wp(500, 0)], 0, ltp=LTP)
        assert obj.heading_cmd_rad == pytest.approx(0.0, abs=1e-9)
        assert cursor == 0

    def test_due_east_bearing(self):
        obj, _ = sequencer_step(_aircraft(), [_wp(0, 500)], 0, ltp=LTP)
        assert obj.heading_cmd_rad == pytest.approx(math.pi / 2, abs=1e-6)

    def test_arrival_advances_cursor(self):
        plan = [_wp(20, 0), _wp(500, 0)]
        _, cursor = sequencer_step(_aircraft(), plan, 0, ltp=LTP)
        assert cursor == 1
        _, cursor = sequencer_step(_aircraft(), [_wp(31, 0), _wp(500, 0)], 0, ltp=LTP)
        assert cursor == 0

    def test_climb_objective_sign(self):
        obj, _ = sequencer_step(_aircraft(alt=100), [_wp(500, 0, alt=150)], 0, ltp=LTP)
        assert obj.pitch_cmd_rad > 0
        obj, _ = sequencer_step(_aircraft(alt=100), [_wp(500, 0, alt=50)], 0, ltp=LTP)
        assert obj.pitch_cmd_rad < 0

    def test_end_of_plan_holds_last(self):
        plan = [_wp(500, 0)]
        obj, cursor = sequencer_step(_aircraft(490), plan, 0, ltp=LTP)
        assert cursor == 1
        obj2, cursor2 = sequencer_step(_aircraft(490), plan, cursor, ltp=LTP)
        assert cursor2 == 1 and obj2.heading_cmd_rad == pytest.approx(0.0, abs=1e-9)

    def test_empty_plan(self):
        with pytest.raises(PlanError):
            sequencer_step(_aircraft(), [], 0)

    def test_shortest_turn_across_the_dateline_of_bearings(self):
        # heading due south; targets just either side of south
        ac = _aircraft(heading=math.pi)
        d = 1000.0
        b1, b2 = math.radians(179.0), math.radians(-179.0)
        o1, _ = sequencer_step(ac, [_wp(d * math.cos(b1), d * math.sin(b1))], 0, ltp=LTP)
        o2, _ = sequencer_step(ac, [_wp(d * math.cos(b2), d * math.sin(b2))], 0, ltp=LTP)
        g = AutopilotGains()
        assert abs(wrap_angle(o1.heading_cmd_rad - o2.heading_cmd_rad)) <= math.radians(2.0) + 1e-9
        assert abs(o1.roll_cmd_rad - o2.roll_cmd_rad) <= g.course_kp * math.radians(2.0) + 1e-9

    @settings(max_examples=200)
    @given(st.floats(-3000, 3000), st.floats(-3000, 3000), st.floats(-math.pi, math.pi))
    def test_roll_command_within_bank_limit(self, n, e, heading):
        g = AutopilotGains()
        obj, _ = sequencer_step(_aircraft(heading=heading), [_wp(n, e)], 0, g, LTP)
        assert abs(obj.roll_cmd_rad) <= g.bank_limit_rad
        assert -math.pi <= obj.heading_cmd_rad < math.pi


class TestMission:
    def test_single_waypoint(self):
        res = simulate_mission([_wp(500, 0)], model=_aircraft(), ltp=LTP, timeout_s=120)
        assert res.report.complete
        assert res.report.arrivals[0].within_radius
        assert res.report.duration_s < 30.0

    def test_square_visits_all_in_order(self, square):
        plan, res = square
        assert res.report.complete
        times = [a.t_s for a in res.report.arrivals]
        assert all(a.within_radius for a in res.report.arrivals)
        assert times == sorted(times)

    def test_square_cross_track_after_settling(self, square):
        _, res = square
        corners = [(1000, 0), (1000, 1000), (0, 1000), (0, 0)]
        pos = np.array([s.position_ned[:2] for s in res.log])
        cursor = np.array([s.cursor for s in res.log])
        for leg in (1, 2, 3):
            a, b = np.array(corners[leg - 1], float), np.array(corners[leg], float)
            u = (b - a) / np.linalg.norm(b - a)
            rel = pos[cursor == leg] - a
            along, cross = rel @ u, rel @ np.array([-u[1], u[0]])
            settled = (along > 300) & (along < 900)
            assert settled.any()
            assert np.max(np.abs(cross[settled])) < 20.0

    def test_cursor_is_monotone(self, square):
        _, res = square
        cursors = [s.cursor for s in res.log]
        assert all(a <= b for a, b in zip(cursors, cursors[1:]))

    @pytest.mark.parametrize("airspeed", [18.0, 25.0])
    def test_crosswind_crab_angle(self, airspeed):
        g = AutopilotGains(groundspeed_mps=airspeed)
        ac = _aircraft(e=40.0, speed=airspeed, wind=(0.0, 5.0, 0.0))
        res = simulate_mission([_wp(-1000, 0), _wp(4000, 0)], g, ac, ltp=LTP, timeout_s=150)
        tail = res.log[-500:]
        for s in tail:
            crab = wrap_angle(s.yaw_rad - s.course_rad)
            assert abs(abs(crab) - math.asin(5.0 / s.airspeed_mps)) < math.radians(1.0)
            # crabbed into the wind (wind blows east, nose points west of track)
            assert crab < 0

    def test_timeout_reports_incomplete(self):
        res = simulate_mission([_wp(5000, 0), _wp(0, 0)], model=_aircraft(), ltp=LTP, timeout_s=10)
        assert not res.report.complete
        assert not res.report.arrivals[0].arrived
        assert res.report.arrivals[0].t_s is None
        assert res.log[-1].t_s == pytest.approx(10.0)

    def test_deterministic(self):
        plan = [_wp(600, 0), _wp(600, 600)]
        a = simulate_mission(plan, model=_aircraft(wind=(1.0, 2.0, 0.0)), ltp=LTP, record_truth=True)
        b = simulate_mission(plan, model=_aircraft(wind=(1.0, 2.0, 0.0)), ltp=LTP, record_truth=True)
        assert a.log == b.log
        assert [t.t_s for t in a.truth] == [t.t_s for t in b.truth]
        assert all(np.array_equal(x.position_ned, y.position_ned) for x, y in zip(a.truth, b.truth))

    def test_truth_is_sampled_at_plant_rate(self):
        res = simulate_mission([_wp(300, 0)], model=_aircraft(), ltp=LTP, record_truth=True)
        ts = np.array([t.t_s for t in res.truth])
        assert np.allclose(np.diff(ts), 1.0 / 250.0)

    def test_shutter_on_survey_legs_only(self):
        plan = [_wp(-150, 0, kind="turn"), _wp(0, 0, kind="survey"), _wp(600, 0, kind="survey"), _wp(750, 0, kind="turn")]
        res = simulate_mission(plan, model=_aircraft(-400.0), ltp=LTP, shutter_interval_s=3.0)
        assert res.report.complete
        shots = res.shots
        north = [LTP.to_ned(s.lat_deg, s.lon_deg)[0] for s in shots]
        assert all(-1.0 <= n <= 601.0 for n in north)
        gaps = np.diff([s.t_s for s in shots])
        assert np.allclose(gaps[:-1], 3.0)
        # the last gap is a regular one or a closing shot past the leg end
        assert 1.5 < gaps[-1] <= 3.0 + 1e-9
        assert len(shots) == pytest.approx(600 / (3.0 * 20.0) + 1, abs=1)
        assert {s.line_index for s in shots} == {0}

    def test_closing_shot_at_leg_end(self):
        # 640 m at 60 m per shot leaves 40 m (over half an interval) after the last regular shot
        plan = [_wp(-150, 0, kind="turn"), _wp(0, 0, kind="survey"), _wp(640, 0, kind="survey"), _wp(790, 0, kind="turn")]
        res = simulate_mission(plan, model=_aircraft(-400.0), ltp=LTP, shutter_interval_s=3.0)
        north = [LTP.to_ned(s.lat_deg, s.lon_deg)[0] for s in res.shots]
        assert north[-1] == pytest.approx(640.0, abs=1.0)
        assert np.allclose(np.diff([s.t_s for s in res.shots])[:-1], 3.0)

    def test_artifacts(self, tmp_path, square):
        _, res = square
        p = tmp_path / "traj.csv"
        write_trajectory_csv(res.log[:10], p)
        rows = list(csv.reader(p.open()))
        assert tuple(rows[0]) == TRAJECTORY_CSV_HEADER
        assert len(rows) == 11
        r = tmp_path / "report.json"
        write_report_json(res.report, r)
        d = json.loads(r.read_text())
        assert d["complete"] is True and len(d["waypoints"]) == 4
