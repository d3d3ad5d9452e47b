"""Deterministic truth trajectories and synthetic sensor streams.

The simulator is the ground truth every estimator test is checked against.
Accelerometer samples are produced by running the gravity-extraction model
forwards: ``a_measured = a_dynamic + omega x v - g_body`` where
``a_dynamic`` is the rate of change of the body-frame velocity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .absolute import ReferencePair
from .attitude import (
    GRAVITY,
    BodyRates,
    EulerAngles,
    Quaternion,
    body_rates_from_euler_rates,
    dcm_to_quat,
    euler_to_dcm,
    wrap_angle,
)
from .errors import FormatError, InvalidInputError
from .geo import LocalTangentPlane

IMU_RATE_HZ = 250.0
MAG_RATE_HZ = 50.0
GPS_RATE_HZ = 4.0

SEGMENT_KINDS = ("straight", "turn", "climb", "hold")
RECORD_KINDS = ("imu", "mag", "gps")
_KIND_ORDER = {k: i for i, k in enumerate(RECORD_KINDS)}


@dataclass(frozen=True)
class Segment:
    """One maneuver of a scripted trajectory.

    ``speed_mps=None`` keeps the previous airspeed. ``hold`` keeps every
    command of the previous segment.
    """

    kind: str
    duration_s: float
    speed_mps: float | None = None
    turn_rate_rps: float = 0.0
    climb_rate_mps: float = 0.0

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise InvalidInputError(f"unknown segment kind {self.kind!r}")
        if not self.duration_s > 0.0:
            raise InvalidInputError("segment duration must be positive")

    @classmethod
    def straight(cls, duration_s, speed_mps=None):
        return cls("straight", duration_s, speed_mps)

    @classmethod
    def turn(cls, duration_s, turn_rate_rps, speed_mps=None):
        return cls("turn", duration_s, speed_mps, turn_rate_rps=turn_rate_rps)

    @classmethod
    def climb(cls, duration_s, climb_rate_mps, speed_mps=None):
        return cls("climb", duration_s, speed_mps, climb_rate_mps=climb_rate_mps)

    @classmethod
    def hold(cls, duration_s):
        return cls("hold", duration_s)


@dataclass(frozen=True)
class TruthState:
    t_s: float
    position_ned: np.ndarray
    velocity_ned: np.ndarray
    attitude: Quaternion
    rates: BodyRates
    a_dynamic: np.ndarray
    euler: EulerAngles

    @property
    def velocity_body(self):
        return euler_to_dcm(self.euler).T @ self.velocity_ned


@dataclass(frozen=True)
class SensorErrorModel:
    gyro_bias_rps: tuple = (0.0, 0.0, 0.0)
    gyro_noise_rps: float = 0.0
    accel_noise_mps2: float = 0.0
    mag_noise: float = 0.0
    vibration_amp_mps2: float = 5.0
    vibration_freq_hz: float = 50.0
    gps_vel_noise_mps: float = 0.0
    gps_pos_noise_m: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("gyro_noise_rps", "accel_noise_mps2", "mag_noise", "gps_vel_noise_mps", "gps_pos_noise_m"):
            if getattr(self, name) < 0.0:
                raise InvalidInputError(f"{name} must be >= 0")
        object.__setattr__(self, "gyro_bias_rps", tuple(float(b) for b in self.gyro_bias_rps))

    @classmethod
    def ideal(cls, seed=0):
        """No bias, noise or vibration."""
        return cls(vibration_amp_mps2=0.0, seed=seed)

    @classmethod
    def realistic(cls, seed=0, gyro_bias_dps=(0.5, 0.5, 0.5)):
        """Small-MEMS magnitudes used by the fusion acceptance scenarios."""
        return cls(
            gyro_bias_rps=tuple(math.radians(b) for b in gyro_bias_dps),
            gyro_noise_rps=math.radians(0.3),
            accel_noise_mps2=0.05,
            mag_noise=0.005,
            vibration_amp_mps2=5.0,
            vibration_freq_hz=50.0,
            gps_vel_noise_mps=0.05,
            gps_pos_noise_m=2.0,
            seed=seed,
        )


@dataclass
class SensorRecord:
    t_s: float
    kind: str
    acc: tuple | None = None
    gyro: tuple | None = None
    mag: tuple | None = None
    lat_deg: float | None = None
    lon_deg: float | None = None
    alt_m: float | None = None
    vel_ned: tuple | None = None

    def to_dict(self):
        d = {"t_s": self.t_s, "kind": self.kind}
        if self.kind == "imu":
            d["acc"] = list(self.acc)
            d["gyro"] = list(self.gyro)
        elif self.kind == "mag":
            d["mag"] = list(self.mag)
        else:
            d.update(lat_deg=self.lat_deg, lon_deg=self.lon_deg, alt_m=self.alt_m, vel_ned=list(self.vel_ned))
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        t = float(d["t_s"])
        if kind == "imu":
            return cls(t, kind, acc=_vec3(d["acc"], "acc"), gyro=_vec3(d["gyro"], "gyro"))
        if kind == "mag":
            return cls(t, kind, mag=_vec3(d["mag"], "mag"))
        if kind == "gps":
            return cls(
                t,
                kind,
                lat_deg=float(d["lat_deg"]),
                lon_deg=float(d["lon_deg"]),
                alt_m=float(d["alt_m"]),
                vel_ned=_vec3(d["vel_ned"], "vel_ned"),
            )
        raise ValueError(f"unknown record kind {kind!r}")


def _vec3(v, name):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ValueError(f"{name} must be a list of 3 numbers")
    out = tuple(float(x) for x in v)
    if not all(math.isfinite(x) for x in out):
        raise ValueError(f"{name} contains non-finite values")
    return out


# --- trajectory -----------------------------------------------------------


class _Ramp:
    """Smootherstep blend from ``x0`` to ``x1`` over ``tau`` seconds.

    The blend has zero first and second derivatives at both ends, so a
    command change never puts a kink in the acceleration history.
    """

    def __init__(self, x0, x1, tau):
        self.x0, self.x1, self.tau = x0, x1, tau
        self.dx = x1 - x0

    def value(self, u):
        if self.tau <= 0.0 or u >= self.tau:
            return self.x1
        s = u / self.tau
        return self.x0 + self.dx * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)

    def rate(self, u):
        if self.tau <= 0.0 or u >= self.tau:
            return 0.0
        s = u / self.tau
        return self.dx * 30.0 * s * s * (1.0 - s) * (1.0 - s) / self.tau

    def integral(self, u):
        if self.tau <= 0.0:
            return self.x1 * u
        if u < self.tau:
            s = u / self.tau
            return self.x0 * u + self.dx * self.tau * s**4 * (2.5 - 3.0 * s + s * s)
        return self.x0 * self.tau + 0.5 * self.dx * self.tau + self.x1 * (u - self.tau)


def kinematic_truth(t_s, position_ned, euler, euler_dot, velocity_ned, accel_ned):
    """Assemble a :class:`TruthState` from Euler angles, their rates and NED kinematics."""
    C = euler_to_dcm(euler)
    w = body_rates_from_euler_rates(euler, euler_dot)
    v_b = C.T @ velocity_ned
    a_dyn = C.T @ accel_ned - np.cross(w, v_b)
    return TruthState(
        t_s=t_s,
        position_ned=np.asarray(position_ned, dtype=float),
        velocity_ned=np.asarray(velocity_ned, dtype=float),
        attitude=dcm_to_quat(C),
        rates=BodyRates.from_array(w),
        a_dynamic=a_dyn,
        euler=euler,
    )


def generate_trajectory(
    segments,
    *,
    rate_hz=IMU_RATE_HZ,
    initial_position_ned=(0.0, 0.0, -100.0),
    initial_heading_rad=0.0,
    initial_speed_mps=20.0,
    transition_s=1.0,
):
    """Sample a scripted flight at ``rate_hz``.

    Commands (turn rate, climb rate, airspeed) blend between segments with a
    smootherstep ramp of ``transition_s`` so that bank and pitch, and thus
    body rates, stay continuous. Bank follows the coordinated-turn relation
    ``tan(roll) = V * yaw_rate / g`` and pitch equals the flight-path angle.
    Samples cover ``[0, total_duration)``.
    """
    segments = list(segments)
    if not segments:
        raise InvalidInputError("trajectory needs at least one segment")

    first = segments[0]
    speed = initial_speed_mps if first.speed_mps is None else first.speed_mps
    cmd = _segment_commands(first, (0.0, 0.0, speed))

    dt = 1.0 / rate_hz
    states = []
    psi0 = initial_heading_rad
    h0 = -float(initial_position_ned[2])
    north, east = float(initial_position_ned[0]), float(initial_position_ned[1])
    t0 = 0.0
    prev_cmd = cmd
    k = 0
    last_vh = None
    for seg in segments:
        target = _segment_commands(seg, prev_cmd)
        tau = min(transition_s, seg.duration_s)
        ramps = [_Ramp(a, b, tau) for a, b in zip(prev_cmd, target)]
        r_ramp, h_ramp, v_ramp = ramps
        t_end = t0 + seg.duration_s
        while True:
            t = k / rate_hz
            if t >= t_end - 1e-9:
                break
            u = t - t0
            psi_dot, h_dot, V = (ramp.value(u) for ramp in ramps)
            psi_ddot, h_ddot, V_dot = (ramp.rate(u) for ramp in ramps)
            psi = psi0 + r_ramp.integral(u)
            h = h0 + h_ramp.integral(u)
            if V <= 0.0 and h_dot != 0.0:
                raise InvalidInputError("cannot climb with zero airspeed")
            vh2 = max(0.0, V * V - h_dot * h_dot)
            vh = math.sqrt(vh2)
            vh_dot = (V * V_dot - h_dot * h_ddot) / vh if vh > 0.0 else 0.0

            bank_arg = V * psi_dot / GRAVITY
            roll = math.atan(bank_arg)
            roll_dot = (V_dot * psi_dot + V * psi_ddot) / GRAVITY / (1.0 + bank_arg * bank_arg)
            if V > 0.0:
                s = h_dot / V
                pitch = math.asin(max(-1.0, min(1.0, s)))
                pitch_dot = (h_ddot * V - h_dot * V_dot) / (V * V) / math.sqrt(max(1e-12, 1.0 - s * s))
            else:
                pitch, pitch_dot = 0.0, 0.0

            c, sn = math.cos(psi), math.sin(psi)
            vel = np.array([vh * c, vh * sn, -h_dot])
            acc = np.array([vh_dot * c - vh * psi_dot * sn, vh_dot * sn + vh * psi_dot * c, -h_ddot])
            if last_vh is not None:
                north += 0.5 * dt * (last_vh[0] + vel[0])
                east += 0.5 * dt * (last_vh[1] + vel[1])
            last_vh = vel
            euler = EulerAngles(roll, pitch, wrap_angle(psi))
            states.append(
                kinematic_truth(t, np.array([north, east, -h]), euler, (roll_dot, pitch_dot, psi_dot), vel, acc)
            )
            k += 1
        psi0 += r_ramp.integral(seg.duration_s)
        h0 += h_ramp.integral(seg.duration_s)
        t0 = t_end
        prev_cmd = target
    return states


def _segment_commands(seg, prev):
    """(turn rate, climb rate, speed) commanded by ``seg`` given the previous commands."""
    speed = prev[2] if seg.speed_mps is None else float(seg.speed_mps)
    if seg.kind == "hold":
        return prev
    if seg.kind == "straight":
        return (0.0, 0.0, speed)
    if seg.kind == "turn":
        return (float(seg.turn_rate_rps), 0.0, speed)
    return (0.0, float(seg.climb_rate_mps), speed)


# --- sensors --------------------------------------------------------------


def simulate_sensors(
    truth,
    err: SensorErrorModel = SensorErrorModel(),
    *,
    ref: ReferencePair | None = None,
    ltp: LocalTangentPlane | None = None,
    mag_rate_hz=MAG_RATE_HZ,
    gps_rate_hz=GPS_RATE_HZ,
):
    """Turn a uniformly sampled truth stream into time-ordered sensor records.

    IMU records come at the truth rate, magnetometer records on every
    ``imu_rate / mag_rate``-th IMU sample, GPS records at exact multiples of
    ``1 / gps_rate`` (interpolated between truth samples). Records sharing a
    timestamp are ordered imu, mag, gps.
    """
    truth = list(truth)
    if len(truth) < 2:
        raise InvalidInputError("truth stream needs at least two samples")
    ref = ref or ReferencePair()
    ltp = ltp or LocalTangentPlane()
    t = np.array([s.t_s for s in truth])
    dt = t[1] - t[0]
    imu_rate = 1.0 / dt
    decim = imu_rate / mag_rate_hz
    if abs(decim - round(decim)) > 1e-6:
        raise InvalidInputError(f"IMU rate {imu_rate:g} Hz is not a multiple of mag rate {mag_rate_hz:g} Hz")
    decim = int(round(decim))

    n = len(truth)
    seeds = np.random.SeedSequence(err.seed).spawn(4)
    rng_gyro, rng_acc, rng_mag, rng_gps = (np.random.default_rng(s) for s in seeds)
    gyro_noise = rng_gyro.normal(0.0, 1.0, size=(n, 3)) * err.gyro_noise_rps
    acc_noise = rng_acc.normal(0.0, 1.0, size=(n, 3)) * err.accel_noise_mps2
    n_mag = (n + decim - 1) // decim
    mag_noise = rng_mag.normal(0.0, 1.0, size=(n_mag, 3)) * err.mag_noise

    g_n = np.array([0.0, 0.0, GRAVITY])
    bias = np.array(err.gyro_bias_rps)
    out = []
    for k, s in enumerate(truth):
        C = euler_to_dcm(s.euler)
        w = s.rates.as_array()
        v_b = C.T @ s.velocity_ned
        g_b = C.T @ g_n
        vib = err.vibration_amp_mps2 * math.sin(2.0 * math.pi * err.vibration_freq_hz * s.t_s)
        acc = s.a_dynamic + np.cross(w, v_b) - g_b + vib + acc_noise[k]
        gyro = w + bias + gyro_noise[k]
        out.append(SensorRecord(s.t_s, "imu", acc=_tup(acc), gyro=_tup(gyro)))
        if k % decim == 0:
            m = C.T @ ref.m_R + mag_noise[k // decim]
            out.append(SensorRecord(s.t_s, "mag", mag=_tup(m)))

    gps = []
    j = 0
    while True:
        tg = j / gps_rate_hz
        if tg > t[-1] + 1e-12:
            break
        if tg >= t[0] - 1e-12:
            i = min(int(np.searchsorted(t, tg, side="right")) - 1, n - 2)
            i = max(i, 0)
            f = (tg - t[i]) / (t[i + 1] - t[i])
            pos = (1 - f) * truth[i].position_ned + f * truth[i + 1].position_ned
            vel = (1 - f) * truth[i].velocity_ned + f * truth[i + 1].velocity_ned
            pos = pos + rng_gps.normal(0.0, 1.0, size=3) * err.gps_pos_noise_m
            vel = vel + rng_gps.normal(0.0, 1.0, size=3) * err.gps_vel_noise_mps
            lat, lon, alt = ltp.to_geodetic(*pos)
            gps.append(SensorRecord(tg, "gps", lat_deg=lat, lon_deg=lon, alt_m=alt, vel_ned=_tup(vel)))
        j += 1
    return merge_records(out, gps)


def _tup(v):
    return tuple(float(x) for x in v)


def merge_records(*streams):
    """Merge time-sorted record lists, breaking timestamp ties as imu, mag, gps."""
    merged = [r for s in streams for r in s]
    merged.sort(key=lambda r: (r.t_s, _KIND_ORDER[r.kind]))
    return merged


# --- JSON Lines -------------------------------------------------------------


def dumps_record(rec: SensorRecord) -> str:
    return json.dumps(rec.to_dict(), separators=(",", ":"))


def write_sensor_log(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_record(rec))
            fh.write("\n")


def read_sensor_log(path):
    """Parse a sensor JSON Lines file; errors carry the offending line number."""
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if not isinstance(d, dict):
                    raise ValueError("record is not a JSON object")
                rec = SensorRecord.from_dict(d)
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"bad sensor record: {exc}", line=lineno, path=path) from None
            if not math.isfinite(rec.t_s):
                raise FormatError("non-finite timestamp", line=lineno, path=path)
            records.append(rec)
    return records
