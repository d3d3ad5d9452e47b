"""Waypoint sequencer and PID loops flown around a kinematic aircraft.

The outer layer turns the active waypoint into objectives (bank, pitch,
course and groundspeed); the inner layer turns objectives into surface and
throttle commands. The plant is kinematic: commanded roll/pitch rates,
coordinated-turn heading rate, first-order airspeed and a constant wind.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .attitude import GRAVITY, EulerAngles, wrap_angle
from .errors import InvalidInputError, PlanError
from .geo import LocalTangentPlane, bearing_rad

TRAJECTORY_CSV_HEADER = ("t_s", "lat_deg", "lon_deg", "alt_m", "roll_deg", "pitch_deg", "yaw_deg", "gspd_mps")


@dataclass(frozen=True)
class Waypoint:
    lat_deg: float
    lon_deg: float
    alt_m: float
    kind: str = "nav"

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lat_deg, self.lon_deg, self.alt_m)):
            raise InvalidInputError("waypoint coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise InvalidInputError(f"latitude {self.lat_deg} out of range")
        if not -180.0 <= self.lon_deg < 180.0:
            raise InvalidInputError(f"longitude {self.lon_deg} out of range [-180, 180)")
        if self.alt_m < 0.0:
            raise InvalidInputError("waypoint altitude must be >= 0")

    @classmethod
    def from_ned(cls, ltp: LocalTangentPlane, north, east, alt_m, kind="nav"):
        lat, lon, _ = ltp.to_geodetic(north, east, 0.0)
        return cls(lat, lon, alt_m, kind)


@dataclass(frozen=True)
class Objectives:
    roll_cmd_rad: float
    pitch_cmd_rad: float
    heading_cmd_rad: float  # ground-track course objective
    groundspeed_cmd_mps: float
    altitude_cmd_m: float = 0.0


@dataclass(frozen=True)
class ControlOutputs:
    aileron: float
    elevator: float
    rudder: float
    throttle: float

    def __post_init__(self):
        for name in ("aileron", "elevator", "rudder"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise InvalidInputError(f"{name} must lie in [-1, 1]")
        if not 0.0 <= self.throttle <= 1.0:
            raise InvalidInputError("throttle must lie in [0, 1]")


@dataclass
class PidController:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    out_min: float = -1.0
    out_max: float = 1.0
    i_min: float = -math.inf
    i_max: float = math.inf
    wrap: bool = False
    integrator: float = 0.0
    prev_error: float | None = None

    def __post_init__(self):
        if self.out_min > self.out_max or self.i_min > self.i_max:
            raise InvalidInputError("PID limits are inverted")

    def reset(self):
        self.integrator = 0.0
        self.prev_error = None


def pid_step(c: PidController, setpoint, measured, dt_s) -> float:
    """One PID update with a clamped integrator (anti-windup) and clamped output.

    With ``c.wrap`` the error is an angle and is wrapped to [-pi, pi) first.
    The derivative term is zero on the first call.
    """
    if not dt_s > 0.0:
        raise InvalidInputError("dt_s must be positive")
    e = setpoint - measured
    if c.wrap:
        e = wrap_angle(e)
    c.integrator = min(c.i_max, max(c.i_min, c.integrator + e * dt_s))
    if c.prev_error is None:
        d = 0.0
    else:
        de = e - c.prev_error
        d = (wrap_angle(de) if c.wrap else de) / dt_s
    c.prev_error = e
    u = c.kp * e + c.ki * c.integrator + c.kd * d
    return min(c.out_max, max(c.out_min, u))


@dataclass
class AutopilotGains:
    course_kp: float = 1.2  # rad of bank per rad of course error
    bank_limit_rad: float = math.radians(35.0)
    roll_kp: float = 2.0
    roll_ki: float = 0.3
    roll_kd: float = 0.05
    altitude_kp: float = 0.02  # rad of pitch per m of altitude error
    pitch_limit_rad: float = math.radians(12.0)
    pitch_kp: float = 2.0
    pitch_ki: float = 0.3
    pitch_kd: float = 0.05
    speed_kp: float = 0.08
    speed_ki: float = 0.02
    throttle_trim: float = 0.5
    groundspeed_mps: float = 20.0
    arrival_radius_m: float = 30.0
    lookahead_m: float = 150.0

    def __post_init__(self):
        if not self.arrival_radius_m > 0.0:
            raise InvalidInputError("arrival radius must be positive")
        if not 0.0 < self.bank_limit_rad < math.pi / 2:
            raise InvalidInputError("bank limit must lie in (0, 90) deg")
        if not self.groundspeed_mps > 0.0:
            raise InvalidInputError("groundspeed must be positive")
        if self.lookahead_m < 0.0:
            raise InvalidInputError("lookahead must be >= 0")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown gain keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass
class KinematicAircraft:
    """Point-mass aircraft with rate-commanded attitude and coordinated turns."""

    position_ned: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading_rad: float = 0.0
    airspeed_mps: float = 20.0
    roll_rad: float = 0.0
    pitch_rad: float = 0.0
    wind_ned: tuple = (0.0, 0.0, 0.0)
    max_roll_rate_rps: float = math.radians(60.0)
    max_pitch_rate_rps: float = math.radians(30.0)
    roll_limit_rad: float = math.radians(45.0)
    pitch_limit_rad: float = math.radians(20.0)
    climb_rate_limit_mps: float = 4.0
    speed_tau_s: float = 1.5
    min_airspeed_mps: float = 12.0
    max_airspeed_mps: float = 32.0
    # derivatives from the most recent step, for truth generation
    roll_dot: float = 0.0
    pitch_dot: float = 0.0
    heading_dot: float = 0.0
    accel_ned: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position_ned = np.asarray(self.position_ned, dtype=float).copy()
        self.wind_ned = tuple(float(w) for w in self.wind_ned)
        if not self.min_airspeed_mps < self.max_airspeed_mps:
            raise InvalidInputError("airspeed band is empty")
        if self.airspeed_mps < self.min_airspeed_mps:
            raise InvalidInputError("initial airspeed below the stall floor")

    def _climb_rate(self):
        c = self.airspeed_mps * math.sin(self.pitch_rad)
        return min(self.climb_rate_limit_mps, max(-self.climb_rate_limit_mps, c))

    def ground_velocity(self):
        climb = self._climb_rate()
        vh = math.sqrt(max(0.0, self.airspeed_mps**2 - climb**2))
        w = self.wind_ned
        return np.array(
            [vh * math.cos(self.heading_rad) + w[0], vh * math.sin(self.heading_rad) + w[1], -climb + w[2]]
        )

    @property
    def course_rad(self):
        v = self.ground_velocity()
        if math.hypot(v[0], v[1]) < 1e-6:
            return wrap_angle(self.heading_rad)
        return bearing_rad(v[0], v[1])

    @property
    def groundspeed_mps(self):
        v = self.ground_velocity()
        return math.hypot(v[0], v[1])

    @property
    def altitude_m(self):
        return -self.position_ned[2]

    @property
    def euler(self):
        return EulerAngles(self.roll_rad, self.pitch_rad, wrap_angle(self.heading_rad))

    def step(self, u: ControlOutputs, dt_s):
        v0 = self.ground_velocity()
        self.roll_dot = u.aileron * self.max_roll_rate_rps
        self.pitch_dot = u.elevator * self.max_pitch_rate_rps
        roll = self.roll_rad + self.roll_dot * dt_s
        pitch = self.pitch_rad + self.pitch_dot * dt_s
        if abs(roll) > self.roll_limit_rad:
            roll = math.copysign(self.roll_limit_rad, roll)
            self.roll_dot = (roll - self.roll_rad) / dt_s
        if abs(pitch) > self.pitch_limit_rad:
            pitch = math.copysign(self.pitch_limit_rad, pitch)
            self.pitch_dot = (pitch - self.pitch_rad) / dt_s
        self.heading_dot = GRAVITY * math.tan(self.roll_rad) / self.airspeed_mps
        target = self.min_airspeed_mps + u.throttle * (self.max_airspeed_mps - self.min_airspeed_mps)
        speed = self.airspeed_mps + (target - self.airspeed_mps) * (dt_s / self.speed_tau_s)
        self.heading_rad = wrap_angle(self.heading_rad + self.heading_dot * dt_s)
        self.roll_rad, self.pitch_rad = roll, pitch
        self.airspeed_mps = min(self.max_airspeed_mps, max(self.min_airspeed_mps, speed))
        v1 = self.ground_velocity()
        self.position_ned = self.position_ned + 0.5 * dt_s * (v0 + v1)
        self.accel_ned = (v1 - v0) / dt_s


class Autopilot:
    """Inner control loops: objectives in, surface and throttle commands out."""

    def __init__(self, gains: AutopilotGains | None = None):
        g = self.gains = gains or AutopilotGains()
        self.roll_pid = PidController(g.roll_kp, g.roll_ki, g.roll_kd, i_min=-0.5, i_max=0.5)
        self.pitch_pid = PidController(g.pitch_kp, g.pitch_ki, g.pitch_kd, i_min=-0.5, i_max=0.5)
        i_lim = 1.0 / g.speed_ki if g.speed_ki > 0 else math.inf
        self.speed_pid = PidController(
            g.speed_kp, g.speed_ki, 0.0, out_min=-g.throttle_trim, out_max=1.0 - g.throttle_trim,
            i_min=-i_lim, i_max=i_lim,
        )

    def control(self, obj: Objectives, ac: KinematicAircraft, dt_s) -> ControlOutputs:
        aileron = pid_step(self.roll_pid, obj.roll_cmd_rad, ac.roll_rad, dt_s)
        elevator = pid_step(self.pitch_pid, obj.pitch_cmd_rad, ac.pitch_rad, dt_s)
        throttle = self.gains.throttle_trim + pid_step(self.speed_pid, obj.groundspeed_cmd_mps, ac.groundspeed_mps, dt_s)
        return ControlOutputs(aileron, elevator, 0.0, min(1.0, max(0.0, throttle)))


def _plan_ned(plan, ltp):
    return [np.array(ltp.to_ned(w.lat_deg, w.lon_deg, w.alt_m)) for w in plan]


def _leg_progress(a, b, p):
    """Along-track distance of ``p`` from ``a`` toward ``b``, leg length and unit vector (horizontal)."""
    d = b[:2] - a[:2]
    length = float(np.hypot(*d))
    if length < 1e-9:
        return 0.0, 0.0, np.zeros(2)
    u = d / length
    return float((p[:2] - a[:2]) @ u), length, u


def sequencer_step(ac: KinematicAircraft, plan, cursor, gains: AutopilotGains | None = None, ltp=None, *, _ned=None):
    """Objectives for the active waypoint and the (possibly advanced) cursor.

    The cursor advances when the aircraft is inside the arrival radius or
    has passed the waypoint along its leg. ``cursor == len(plan)`` means the
    plan is complete; the last waypoint is then held. Course guidance aims
    at a point ``lookahead_m`` ahead on the active leg, or straight at the
    waypoint on the first leg.
    """
    if not plan:
        raise PlanError("plan has no waypoints")
    if not 0 <= cursor <= len(plan):
        raise InvalidInputError(f"cursor {cursor} outside plan of {len(plan)} waypoints")
    g = gains or AutopilotGains()
    ned = _ned if _ned is not None else _plan_ned(plan, ltp or LocalTangentPlane())
    p = ac.position_ned
    if cursor < len(plan):
        target = ned[cursor]
        dist = float(np.hypot(*(target[:2] - p[:2])))
        passed = False
        if cursor > 0:
            s, length, _ = _leg_progress(ned[cursor - 1], target, p)
            passed = length > 0.0 and s >= length
        if dist < g.arrival_radius_m or passed:
            cursor += 1

    active = min(cursor, len(plan) - 1)
    target = ned[active]
    aim = target
    if 0 < cursor < len(plan):
        a = ned[cursor - 1]
        s, length, u = _leg_progress(a, target, p)
        if length > 0.0:
            along = min(max(s, 0.0) + g.lookahead_m, length)
            aim = np.array([*(a[:2] + along * u), target[2]])
    course_cmd = bearing_rad(aim[0] - p[0], aim[1] - p[1])
    err = wrap_angle(course_cmd - ac.course_rad)
    roll_cmd = max(-g.bank_limit_rad, min(g.bank_limit_rad, g.course_kp * err))
    alt_cmd = -target[2]
    pitch_cmd = max(-g.pitch_limit_rad, min(g.pitch_limit_rad, g.altitude_kp * (alt_cmd - ac.altitude_m)))
    return Objectives(roll_cmd, pitch_cmd, course_cmd, g.groundspeed_mps, alt_cmd), cursor


@dataclass(frozen=True)
class MissionSample:
    t_s: float
    lat_deg: float
    lon_deg: float
    alt_m: float
    roll_rad: float
    pitch_rad: float
    yaw_rad: float
    groundspeed_mps: float
    position_ned: tuple
    course_rad: float
    airspeed_mps: float
    cursor: int

    def csv_row(self):
        vals = (
            self.t_s,
            self.lat_deg,
            self.lon_deg,
            self.alt_m,
            math.degrees(self.roll_rad),
            math.degrees(self.pitch_rad),
            math.degrees(self.yaw_rad),
            self.groundspeed_mps,
        )
        return [format(v, ".10g") for v in vals]


@dataclass
class WaypointArrival:
    index: int
    kind: str
    arrived: bool = False
    within_radius: bool = False
    t_s: float | None = None
    miss_distance_m: float = math.inf


@dataclass
class MissionReport:
    arrivals: list
    complete: bool
    duration_s: float
    arrival_radius_m: float

    def to_dict(self):
        return {
            "complete": self.complete,
            "duration_s": round(self.duration_s, 6),
            "arrival_radius_m": self.arrival_radius_m,
            "waypoints": [
                {
                    "index": a.index,
                    "kind": a.kind,
                    "arrived": a.arrived,
                    "within_radius": a.within_radius,
                    "t_s": None if a.t_s is None else round(a.t_s, 6),
                    "miss_distance_m": None if not math.isfinite(a.miss_distance_m) else round(a.miss_distance_m, 6),
                }
                for a in self.arrivals
            ],
        }


@dataclass(frozen=True)
class ShotEvent:
    t_s: float
    line_index: int
    lat_deg: float
    lon_deg: float
    alt_m: float
    euler: EulerAngles


@dataclass
class MissionResult:
    log: list
    report: MissionReport
    truth: list = field(default_factory=list)
    shots: list = field(default_factory=list)


def simulate_mission(
    plan,
    gains: AutopilotGains | None = None,
    model: KinematicAircraft | None = None,
    dt_s=0.02,
    timeout_s=3600.0,
    *,
    ltp: LocalTangentPlane | None = None,
    substeps=5,
    record_truth=False,
    shutter_interval_s=None,
) -> MissionResult:
    """Close the loop at ``dt_s`` until every waypoint is reached or ``timeout_s``.

    The plant runs ``substeps`` Euler steps per control period; with
    ``record_truth`` each substep is also stored as a sensor-simulator
    :class:`~uavkit.sim.TruthState`. With ``shutter_interval_s`` the camera
    fires on survey legs (a ``survey`` waypoint followed by another
    ``survey`` waypoint) while the aircraft is between the two along-track,
    plus one closing shot past the leg end when the last regular shot is
    more than half an interval old.
    """
    from .sim import kinematic_truth

    plan = list(plan)
    if not plan:
        raise PlanError("plan has no waypoints")
    if not dt_s > 0.0 or substeps < 1:
        raise InvalidInputError("dt_s must be positive and substeps >= 1")
    g = gains or AutopilotGains()
    ltp = ltp or LocalTangentPlane()
    ac = model if model is not None else KinematicAircraft(position_ned=np.zeros(3), airspeed_mps=g.groundspeed_mps)
    pilot = Autopilot(g)
    ned = _plan_ned(plan, ltp)
    arrivals = [WaypointArrival(i, w.kind) for i, w in enumerate(plan)]

    survey_legs = {
        i: (i - 1) for i in range(1, len(plan)) if plan[i].kind == "survey" and plan[i - 1].kind == "survey"
    }
    leg_index = {end: n for n, end in enumerate(sorted(survey_legs))}
    armed = None  # (end index, next shot time)
    shots = []

    cursor = 0
    log, truth = [], []
    n_steps = int(math.floor(timeout_s / dt_s + 1e-9))
    h = dt_s / substeps
    t = 0.0
    k = 0
    while True:
        t = k * dt_s
        if cursor < len(plan):
            d = float(np.hypot(*(ned[cursor][:2] - ac.position_ned[:2])))
            arrivals[cursor].miss_distance_m = min(arrivals[cursor].miss_distance_m, d)
        obj, new_cursor = sequencer_step(ac, plan, cursor, g, _ned=ned)
        for i in range(cursor, new_cursor):
            a = arrivals[i]
            a.arrived, a.t_s = True, t
            a.within_radius = a.miss_distance_m < g.arrival_radius_m
        cursor = new_cursor
        if cursor in survey_legs and (armed is None or armed[0] != cursor):
            armed = (cursor, None)

        if armed is not None and shutter_interval_s:
            end = armed[0]
            s, length, _ = _leg_progress(ned[end - 1], ned[end], ac.position_ned)
            if s > length + 1e-6:
                # close the line if its end would otherwise miss more than half an interval
                due = armed[1]
                if due is not None and t - (due - shutter_interval_s) > 0.5 * shutter_interval_s:
                    lat, lon, alt = ltp.to_geodetic(*ac.position_ned)
                    shots.append(ShotEvent(t, leg_index[end], lat, lon, alt, ac.euler))
                armed = None
            elif s >= 0.0:
                due = armed[1]
                if due is None or t >= due - 1e-9:
                    lat, lon, alt = ltp.to_geodetic(*ac.position_ned)
                    shots.append(ShotEvent(t, leg_index[end], lat, lon, alt, ac.euler))
                    armed = (end, (t if due is None else due) + shutter_interval_s)

        lat, lon, alt = ltp.to_geodetic(*ac.position_ned)
        log.append(
            MissionSample(
                t, lat, lon, alt, ac.roll_rad, ac.pitch_rad, wrap_angle(ac.heading_rad), ac.groundspeed_mps,
                tuple(float(x) for x in ac.position_ned), ac.course_rad, ac.airspeed_mps, cursor,
            )
        )
        if cursor >= len(plan) or k >= n_steps:
            break
        u = pilot.control(obj, ac, dt_s)
        for j in range(substeps):
            if record_truth:
                truth.append(_truth(ac, k * dt_s + j * h, kinematic_truth))
            ac.step(u, h)
        k += 1

    report = MissionReport(arrivals, cursor >= len(plan), t, g.arrival_radius_m)
    return MissionResult(log, report, truth, shots)


def _truth(ac: KinematicAircraft, t_s, kinematic_truth):
    vel = ac.ground_velocity()
    return kinematic_truth(
        t_s,
        ac.position_ned.copy(),
        ac.euler,
        (ac.roll_dot, ac.pitch_dot, ac.heading_dot),
        vel,
        ac.accel_ned.copy(),
    )


def write_trajectory_csv(samples, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_CSV_HEADER)
        for s in samples:
            w.writerow(s.csv_row())


def write_report_json(report: MissionReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
