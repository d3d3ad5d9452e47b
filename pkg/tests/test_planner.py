import json
import math

import numpy as np
import pytest

from uavkit.errors import FormatError, InvalidInputError, PlanError
from uavkit.indexer import coverage_analysis, ideal_shots
from uavkit.planner import (
    AreaBoundary,
    CameraSpec,
    FlightPlan,
    PlanParams,
    compute_altitude,
    compute_shutter_interval,
    generate_lawnmower,
    read_plan,
    write_plan,
)

CAM = CameraSpec(60.0, 45.0)
SCALE_100M = 100_000 / 35  # 100 m with the 35 mm virtual focal length


def _local(plan):
    ltp = plan.area.ltp
    return np.array([ltp.to_ned(w.lat_deg, w.lon_deg)[:2] for w in plan.waypoints])


class TestAltitude:
    def test_focal_times_scale(self):
        cam = CameraSpec(focal_length_mm=50.0, sensor_w_mm=36.0, sensor_h_mm=24.0)
        H, fw, fh = compute_altitude(cam, PlanParams(scale=10_000))
        assert H == pytest.approx(500.0)
        # footprint of a real camera is sensor size times scale
        assert fw == pytest.approx(360.0) and fh == pytest.approx(240.0)

    def test_fov_footprint(self):
        H, fw, fh = compute_altitude(CAM, PlanParams(scale=SCALE_100M))
        assert H == pytest.approx(100.0)
        assert fw == pytest.approx(115.47, abs=0.005)
        assert fh == pytest.approx(82.84, abs=0.005)

    @pytest.mark.parametrize("scale", [0.0, -100.0])
    def test_bad_scale(self, scale):
        with pytest.raises(InvalidInputError):
            PlanParams(scale=scale)

    def test_camera_consistency(self):
        h = math.degrees(2 * math.atan(18 / 50))
        v = math.degrees(2 * math.atan(12 / 50))
        CameraSpec(h, v, 50.0, 36.0, 24.0)
        with pytest.raises(InvalidInputError):
            CameraSpec(h + 1.0, v, 50.0, 36.0, 24.0)
        with pytest.raises(InvalidInputError):
            CameraSpec(180.0, 45.0)
        with pytest.raises(InvalidInputError):
            CameraSpec(hfov_deg=60.0)


class TestShutter:
    def test_examples(self):
        assert compute_shutter_interval(100.0, 0.6, 20.0) == pytest.approx(2.0)
        assert compute_shutter_interval(100.0, 0.0, 20.0) == pytest.approx(5.0)

    @pytest.mark.parametrize("overlap,speed", [(1.0, 20.0), (-0.1, 20.0), (0.5, 0.0)])
    def test_errors(self, overlap, speed):
        with pytest.raises(InvalidInputError):
            compute_shutter_interval(100.0, overlap, speed)


class TestBoundary:
    def test_zero_area(self):
        with pytest.raises(PlanError):
            AreaBoundary(-6.9, 107.6, -6.9, 107.7)
        with pytest.raises(PlanError):
            AreaBoundary(-6.8, 107.6, -6.9, 107.7)

    def test_size(self):
        area = AreaBoundary.from_size(1000.0, 500.0)
        assert area.size_m == pytest.approx((1000.0, 500.0), abs=1e-6)


class TestLawnmower:
    def test_single_line_when_one_footprint_wide(self):
        _, fw, _ = compute_altitude(CAM, PlanParams(scale=SCALE_100M))
        area = AreaBoundary.from_size(fw, 400.0)
        plan = generate_lawnmower(area, CAM, PlanParams(scale=SCALE_100M))
        assert plan.line_count == 1
        kinds = [w.kind for w in plan.waypoints]
        assert kinds == ["turn", "survey", "survey", "turn"]
        assert kinds.count("survey") == 2

    def test_line_spacing_formula(self):
        plan = generate_lawnmower(AreaBoundary.from_size(800, 600), CAM, PlanParams(scale=SCALE_100M, overlap_h=0.5))
        assert plan.line_spacing_m == pytest.approx(plan.footprint_m[0] / 2)
        loc = _local(plan)
        starts = [loc[i] for i, w in enumerate(plan.waypoints) if w.kind == "survey"][::2]
        east = np.array([p[1] for p in starts])
        assert np.allclose(np.diff(east), plan.line_spacing_m, atol=1e-6)

    def test_altitudes_and_interval(self):
        params = PlanParams(scale=SCALE_100M, ground_alt_m=700.0, groundspeed_mps=18.0)
        plan = generate_lawnmower(AreaBoundary.from_size(500, 500), CAM, params)
        assert all(w.alt_m == pytest.approx(800.0) for w in plan.waypoints)
        assert plan.shutter_interval_s == pytest.approx(plan.footprint_m[1] * 0.7 / 18.0)

    def test_boustrophedon(self):
        plan = generate_lawnmower(AreaBoundary.from_size(600, 500), CAM, PlanParams(scale=SCALE_100M))
        ltp = plan.area.ltp
        for i, (a, b) in enumerate(plan.survey_lines()):
            na = ltp.to_ned(a.lat_deg, a.lon_deg)[0]
            nb = ltp.to_ned(b.lat_deg, b.lon_deg)[0]
            assert (nb > na) == (i % 2 == 0)

    @pytest.mark.parametrize("direction", ["north-south", "east-west"])
    def test_ideal_flight_covers_area(self, direction):
        area = AreaBoundary.from_size(1000, 500)
        plan = generate_lawnmower(area, CAM, PlanParams(scale=SCALE_100M, overlap_h=0.6, overlap_v=0.3, direction=direction))
        report = coverage_analysis(ideal_shots(plan), CAM, area, 5.0)
        assert report.coverage >= 0.999

    @pytest.mark.parametrize("direction", ["north-south", "east-west"])
    def test_waypoint_footprints_stay_near_boundary(self, direction):
        params = PlanParams(scale=SCALE_100M, direction=direction, small_overshoot_m=40, large_overshoot_m=120)
        area = AreaBoundary.from_size(700, 450)
        plan = generate_lawnmower(area, CAM, params)
        fw, fh = plan.footprint_m
        along_margin = params.large_overshoot_m + fh / 2
        cross_margin = params.small_overshoot_m + fw / 2
        n_margin, e_margin = (along_margin, cross_margin) if direction == "north-south" else (cross_margin, along_margin)
        w, h = area.size_m
        for n, e in _local(plan):
            assert -n_margin - 1e-6 <= n <= h + n_margin + 1e-6
            assert -e_margin - 1e-6 <= e <= w + e_margin + 1e-6

    def test_direction_toggle_transposes(self):
        params = dict(scale=SCALE_100M, overlap_h=0.6, overlap_v=0.3)
        ns = generate_lawnmower(AreaBoundary.from_size(900, 400), CAM, PlanParams(**params, direction="north-south"))
        ew = generate_lawnmower(AreaBoundary.from_size(400, 900), CAM, PlanParams(**params, direction="east-west"))
        assert len(ns.waypoints) == len(ew.waypoints)
        assert np.allclose(_local(ns), _local(ew)[:, ::-1], atol=1e-6)

    def test_shot_spacing(self):
        plan = generate_lawnmower(AreaBoundary.from_size(1000, 500), CAM, PlanParams(scale=SCALE_100M))
        shots = ideal_shots(plan)
        ltp = plan.area.ltp
        line0 = [s for s in shots if s.photo_id.startswith("L000")]
        pts = np.array([ltp.to_ned(s.lat_deg, s.lon_deg)[:2] for s in line0])
        gaps = np.hypot(*np.diff(pts, axis=0).T)
        assert np.all(np.abs(gaps - plan.footprint_m[1] * 0.7) < 1.0)

    def test_deterministic(self):
        args = (AreaBoundary.from_size(640, 380), CAM, PlanParams(scale=SCALE_100M))
        assert generate_lawnmower(*args).to_dict() == generate_lawnmower(*args).to_dict()

    def test_virtual_focal_is_recorded(self):
        plan = generate_lawnmower(AreaBoundary.from_size(300, 300), CAM, PlanParams(scale=SCALE_100M))
        assert any("virtual focal" in a for a in plan.assumptions)


class TestPlanFile:
    def test_round_trip(self, tmp_path):
        plan = generate_lawnmower(AreaBoundary.from_size(500, 300), CAM, PlanParams(scale=SCALE_100M))
        p = tmp_path / "plan.json"
        write_plan(plan, p)
        d = json.loads(p.read_text())
        for key in ("altitude_agl_m", "shutter_interval_s", "footprint_m", "line_spacing_m", "waypoints"):
            assert key in d
        assert set(d["waypoints"][0]) == {"lat_deg", "lon_deg", "alt_m", "kind"}
        back = read_plan(p)
        assert back.to_dict() == plan.to_dict()

    def test_malformed_json_has_line_number(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text('{\n  "altitude_agl_m": 100,\n  "waypoints": [,]\n}\n')
        with pytest.raises(FormatError) as info:
            read_plan(p)
        assert info.value.line == 3

    def test_missing_key(self, tmp_path):
        p = tmp_path / "plan.json"
        p.write_text('{"altitude_agl_m": 100}')
        with pytest.raises(FormatError):
            read_plan(p)

    def test_invalid_interval(self):
        with pytest.raises(PlanError):
            FlightPlan(100.0, [object()], 0.0, (1.0, 1.0), 1.0)
