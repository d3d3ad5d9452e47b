"""``uavkit`` command line: plan, simulate, estimate and index a survey mission.

Every subcommand reads and writes files inside one mission directory
(``--dir``), so a pipeline is::

    uavkit plan --area-size 600,400 --hfov 60 --vfov 45 --scale 2857 --dir run
    uavkit simulate --dir run --seed 0
    uavkit estimate --dir run
    uavkit index --dir run --min-coverage 0.995

Settings resolve as command-line flag, then ``--config`` JSON, then the
built-in default. ``--show-config`` prints the resolved settings and exits.
Exit codes: 0 success, 2 invalid input, 3 coverage gate failed, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .autopilot import (
    AutopilotGains,
    KinematicAircraft,
    simulate_mission,
    write_report_json,
    write_trajectory_csv,
)
from .errata import errata_text
from .errors import UavkitError
from .fusion import NoiseConfig, Rates, read_attitude_csv, run_ahrs, write_attitude_csv
from .indexer import (
    DEFAULT_GRID_RES_M,
    PhotoMetadata,
    coverage_analysis,
    read_shots_csv,
    write_coverage_json,
    write_index_json,
    write_shots_csv,
)
from .planner import AreaBoundary, CameraSpec, PlanParams, generate_lawnmower, read_plan, write_plan
from .sim import SensorErrorModel, read_sensor_log, simulate_sensors, write_sensor_log

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_COVERAGE = 3
EXIT_USAGE = 64

PLAN_FILE = "plan.json"
ERRATA_FILE = "errata-notes.txt"
SENSORS_FILE = "sensors.jsonl"
TRAJECTORY_FILE = "trajectory.csv"
SHOTS_FILE = "shots.csv"
MISSION_FILE = "mission.json"
ATTITUDE_FILE = "attitude.csv"
COVERAGE_FILE = "coverage.json"
INDEX_FILE = "index.json"

LEAD_IN_M = 200.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _InvalidConfig(Exception):
    pass


def _floats(n):
    def parse(text):
        parts = [p for p in str(text).replace(" ", "").split(",") if p]
        if len(parts) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None

    return parse


def build_parser():
    p = _Parser(prog="uavkit", description="Aerial survey planning, simulation, attitude estimation and indexing.")
    sub = p.add_subparsers(dest="command", metavar="{plan,simulate,estimate,index}", parser_class=_Parser)
    sub.required = True
    p.subcommands = sub.choices

    def common(sp):
        sp.add_argument("--dir", default=".", help="mission directory (default: current)")
        sp.add_argument("--config", help="JSON file of settings; flags override it")
        sp.add_argument("--show-config", action="store_true", help="print resolved settings and exit")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("plan", help="boundary + camera + scale -> plan.json")
    common(sp)
    area = sp.add_mutually_exclusive_group()
    area.add_argument("--area", type=_floats(4), metavar="LB_LAT,LB_LON,RT_LAT,RT_LON")
    area.add_argument("--area-size", type=_floats(2), metavar="EAST_M,NORTH_M")
    sp.add_argument("--origin", type=_floats(2), metavar="LAT,LON", help="left-bottom corner for --area-size")
    sp.add_argument("--hfov", type=float, metavar="DEG")
    sp.add_argument("--vfov", type=float, metavar="DEG")
    sp.add_argument("--focal-mm", type=float)
    sp.add_argument("--sensor-mm", type=_floats(2), metavar="W,H")
    sp.add_argument("--scale", type=float, help="photo scale denominator (1:SCALE)")
    sp.add_argument("--overlap-h", type=float, help="side overlap fraction")
    sp.add_argument("--overlap-v", type=float, help="forward overlap fraction")
    sp.add_argument("--direction", choices=("north-south", "east-west"))
    sp.add_argument("--groundspeed", type=float, metavar="M/S")
    sp.add_argument("--ground-alt", type=float, metavar="M")
    sp.add_argument("--small-overshoot", type=float, metavar="M")
    sp.add_argument("--large-overshoot", type=float, metavar="M")

    sp = sub.add_parser("simulate", help="plan.json -> trajectory.csv, shots.csv, sensors.jsonl")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--gains", help="JSON file of autopilot gains")
    sp.add_argument("--wind", type=_floats(2), metavar="NORTH,EAST")
    sp.add_argument("--sensors", choices=("realistic", "ideal"), help="sensor error preset")
    sp.add_argument("--gyro-bias-dps", type=_floats(3), metavar="P,Q,R")
    sp.add_argument("--timeout", type=float, metavar="S")

    sp = sub.add_parser("estimate", help="sensors.jsonl -> attitude.csv")
    common(sp)
    sp.add_argument("--seed", type=int, help="accepted for symmetry; estimation is deterministic")
    sp.add_argument("--rates", help="imu:250,att:50,meas:4")
    sp.add_argument("--noise", help="JSON file of filter noise settings")

    sp = sub.add_parser("index", help="shots.csv -> coverage.json, index.json")
    common(sp)
    sp.add_argument("--shots", help="shots CSV (default: DIR/shots.csv)")
    sp.add_argument("--min-coverage", type=float)
    sp.add_argument("--grid-res", type=float, metavar="M")
    sp.add_argument("--use-estimate", action="store_true", help="tag shots with attitude.csv instead of the shots file")
    return p


DEFAULTS = {
    "plan": {
        "area": None, "area_size": None, "origin": [-6.9146, 107.6098], "hfov": None, "vfov": None,
        "focal_mm": None, "sensor_mm": None, "scale": None, "overlap_h": 0.6, "overlap_v": 0.3,
        "direction": "north-south", "groundspeed": 20.0, "ground_alt": 0.0, "small_overshoot": 50.0,
        "large_overshoot": 150.0,
    },
    "simulate": {
        "seed": 0, "gains": None, "wind": [0.0, 0.0], "sensors": "realistic", "gyro_bias_dps": [0.5, 0.5, 0.5],
        "timeout": 7200.0,
    },
    "estimate": {"seed": 0, "rates": Rates().to_text(), "noise": None},
    "index": {"shots": None, "min_coverage": 0.995, "grid_res": DEFAULT_GRID_RES_M, "use_estimate": False},
}
_META = ("command", "dir", "config", "show_config", "verbose")


def resolve_config(argv):
    """Parse ``argv`` with flag > config file > default precedence."""
    parser = build_parser()
    first = parser.parse_args(argv)
    cmd = first.command
    defaults = dict(DEFAULTS[cmd])
    if first.config:
        with open(first.config, encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise _InvalidConfig(f"{first.config}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise _InvalidConfig(f"{first.config}: expected a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - set(defaults))
        if unknown:
            raise _InvalidConfig(f"{first.config}: unknown settings for {cmd}: {', '.join(unknown)}")
        defaults.update(cfg)
    parser.subcommands[cmd].set_defaults(**defaults)
    return parser.parse_args(argv)


def _settings(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _META}


def _log(args, msg):
    if args.verbose:
        print(msg, file=sys.stderr)


def cmd_plan(args, out: Path):
    if args.area is not None:
        area = AreaBoundary(*args.area)
    elif args.area_size is not None:
        area = AreaBoundary.from_size(*args.area_size, origin=tuple(args.origin))
    else:
        raise _InvalidConfig("plan needs --area or --area-size")
    if args.scale is None:
        raise _InvalidConfig("plan needs --scale")
    sensor = args.sensor_mm or (None, None)
    cam = CameraSpec(args.hfov, args.vfov, args.focal_mm, sensor[0], sensor[1])
    params = PlanParams(
        scale=args.scale,
        overlap_h=args.overlap_h,
        overlap_v=args.overlap_v,
        small_overshoot_m=args.small_overshoot,
        large_overshoot_m=args.large_overshoot,
        ground_alt_m=args.ground_alt,
        direction=args.direction,
        groundspeed_mps=args.groundspeed,
    )
    plan = generate_lawnmower(area, cam, params)
    write_plan(plan, out / PLAN_FILE)
    notes = errata_text()
    if plan.assumptions:
        notes += "\nPlan assumptions\n\n" + "".join(f"- {a}\n" for a in plan.assumptions)
    (out / ERRATA_FILE).write_text(notes, encoding="utf-8")
    _log(args, f"{plan.line_count} lines, {len(plan.waypoints)} waypoints, AGL {plan.altitude_agl_m:.1f} m")
    return EXIT_OK


def _start_pose(plan, ltp):
    """Place the aircraft LEAD_IN_M before the first waypoint, pointed along the first leg."""
    ned = [np.array(ltp.to_ned(w.lat_deg, w.lon_deg, w.alt_m)) for w in plan.waypoints[:2]]
    if len(ned) > 1 and np.hypot(*(ned[1][:2] - ned[0][:2])) > 0.0:
        d = ned[1][:2] - ned[0][:2]
    else:
        d = np.array([1.0, 0.0])
    d = d / np.hypot(*d)
    start = ned[0].copy()
    start[:2] -= LEAD_IN_M * d
    return start, math.atan2(d[1], d[0])


def cmd_simulate(args, out: Path):
    plan = read_plan(out / PLAN_FILE)
    ltp = plan.area.ltp
    gains = AutopilotGains.from_file(args.gains) if args.gains else AutopilotGains(groundspeed_mps=plan.groundspeed_mps)
    start, heading = _start_pose(plan, ltp)
    wind = (args.wind[0], args.wind[1], 0.0)
    ac = KinematicAircraft(position_ned=start, heading_rad=heading, airspeed_mps=plan.groundspeed_mps, wind_ned=wind)
    res = simulate_mission(
        plan.waypoints, gains, ac, timeout_s=args.timeout, ltp=ltp, record_truth=True,
        shutter_interval_s=plan.shutter_interval_s,
    )
    if args.sensors == "ideal":
        err = SensorErrorModel.ideal(seed=args.seed)
    else:
        err = SensorErrorModel.realistic(seed=args.seed, gyro_bias_dps=tuple(args.gyro_bias_dps))
    write_sensor_log(simulate_sensors(res.truth, err, ltp=ltp), out / SENSORS_FILE)
    write_trajectory_csv(res.log, out / TRAJECTORY_FILE)
    write_report_json(res.report, out / MISSION_FILE)

    counters = {}
    photos = []
    for s in res.shots:
        j = counters.get(s.line_index, 0)
        counters[s.line_index] = j + 1
        e = s.euler
        photos.append(PhotoMetadata(f"L{s.line_index:03d}_{j:04d}", s.t_s, s.lat_deg, s.lon_deg, s.alt_m,
                                    e.roll_rad, e.pitch_rad, e.yaw_rad))
    write_shots_csv(photos, out / SHOTS_FILE)
    _log(args, f"mission {'complete' if res.report.complete else 'INCOMPLETE'} in {res.report.duration_s:.1f} s, "
               f"{len(photos)} photos")
    if not res.report.complete:
        raise _InvalidConfig(f"mission did not complete within {args.timeout:g} s")
    return EXIT_OK


def cmd_estimate(args, out: Path):
    rates = Rates.parse(args.rates)
    cfg = NoiseConfig.from_file(args.noise) if args.noise else NoiseConfig.default()
    records = read_sensor_log(out / SENSORS_FILE)
    run = run_ahrs(records, cfg, rates=rates)
    write_attitude_csv(run.records, out / ATTITUDE_FILE)
    _log(args, f"{run.imu_samples} IMU samples, {run.time_updates} time updates, "
               f"{run.measurement_updates} measurement updates")
    return EXIT_OK


def _retag_with_estimate(shots, attitude_path):
    """Replace each shot's attitude with the latest estimate at or before the shutter time."""
    recs = [r for r in read_attitude_csv(attitude_path) if r.kind != "rejected"]
    if not recs:
        raise _InvalidConfig(f"{attitude_path}: no attitude estimates")
    t = np.array([r.t_s for r in recs])
    out = []
    for s in shots:
        i = max(0, int(np.searchsorted(t, s.t_s + 1e-9, side="right")) - 1)
        e = recs[i].euler
        out.append(PhotoMetadata(s.photo_id, s.t_s, s.lat_deg, s.lon_deg, s.alt_m, e.roll_rad, e.pitch_rad, e.yaw_rad))
    return out


def cmd_index(args, out: Path):
    plan = read_plan(out / PLAN_FILE)
    shots = read_shots_csv(args.shots or out / SHOTS_FILE)
    if args.use_estimate:
        shots = _retag_with_estimate(shots, out / ATTITUDE_FILE)
    if not 0.0 <= args.min_coverage <= 1.0:
        raise _InvalidConfig("--min-coverage must be in [0, 1]")
    report = coverage_analysis(shots, plan.camera, plan.area, args.grid_res, plan.ground_alt_m)
    write_coverage_json(report, out / COVERAGE_FILE, min_coverage=args.min_coverage)
    write_index_json(shots, plan.camera, plan.area, out / INDEX_FILE, plan.ground_alt_m)
    _log(args, f"coverage {report.coverage:.4f}, {len(report.blank_spots)} blank spots")
    if report.coverage < args.min_coverage:
        print(f"coverage {report.coverage:.4f} below minimum {args.min_coverage:g}; "
              f"{len(report.blank_spots)} blank spot(s)", file=sys.stderr)
        return EXIT_COVERAGE
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "simulate": cmd_simulate, "estimate": cmd_estimate, "index": cmd_index}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = resolve_config(argv)
        if args.show_config:
            print(json.dumps({"command": args.command, **_settings(args)}, indent=2, sort_keys=True))
            return EXIT_OK
        out = Path(args.dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UavkitError, _InvalidConfig, OSError) as exc:
        print(f"uavkit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
