"""Multirate AHRS: quaternion time update at 50 Hz, TRIAD measurement update at 4 Hz.

State ``x = [e0 e1 e2 e3 bp bq br]`` (quaternion and gyro bias, rad/s).
The filter is linear in ``x`` once the transition matrices are evaluated at
the current quaternion estimate, and the measurement is the quaternion
produced by TRIAD, so ``H = [I4 | 0]``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .absolute import KinematicAiding, ReferencePair, extract_gravity, triad
from .attitude import (
    BodyRates,
    EulerAngles,
    Quaternion,
    dcm_to_quat,
    propagate_quat,
    quat_rate_matrix,
    quat_to_dcm,
    quat_to_euler,
)
from .errors import (
    DegenerateGeometryError,
    InputOrderError,
    InvalidInputError,
    NumericallyDegenerateError,
)
from .filtering import FilterSpec, ImuConditioner, design_butterworth, filter_step

ATTITUDE_CSV_HEADER = (
    "t_s",
    "e0",
    "e1",
    "e2",
    "e3",
    "roll_deg",
    "pitch_deg",
    "yaw_deg",
    "bp_rps",
    "bq_rps",
    "br_rps",
    "kind",
)

_H = np.hstack([np.eye(4), np.zeros((4, 3))])
_MAX_INNOVATION_COND = 1e14


def _check_psd(name, M, size):
    M = np.asarray(M, dtype=float)
    if M.shape != (size, size):
        raise InvalidInputError(f"{name} must be {size}x{size}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise InvalidInputError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) < -1e-12:
        raise InvalidInputError(f"{name} must be positive semidefinite")
    return M


@dataclass
class NoiseConfig:
    """Process noise ``Q`` (per 50 Hz step), measurement noise ``R`` and prior ``P0``."""

    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        self.Q = _check_psd("Q", self.Q, 7)
        self.R = _check_psd("R", self.R, 4)
        self.P0 = _check_psd("P0", self.P0, 7)
        if np.min(np.linalg.eigvalsh(self.R)) <= 0.0:
            raise InvalidInputError("R must be nonsingular")

    @classmethod
    def from_diagonals(cls, q_quat=1e-8, q_bias=1e-10, r=1e-4, p0_quat=1e-2, p0_bias=1e-3):
        return cls(
            Q=np.diag([q_quat] * 4 + [q_bias] * 3),
            R=np.diag([r] * 4),
            P0=np.diag([p0_quat] * 4 + [p0_bias] * 3),
        )

    @classmethod
    def default(cls):
        return cls.from_diagonals()

    @classmethod
    def from_dict(cls, d):
        """Build from scalar diagonals (``q_quat``, ``q_bias``, ``r``, ``p0_quat``,
        ``p0_bias``) and/or full matrices (``Q``, ``R``, ``P0``)."""
        known = {"q_quat", "q_bias", "r", "p0_quat", "p0_bias", "Q", "R", "P0"}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown noise keys: {sorted(unknown)}")
        base = cls.from_diagonals(**{k: float(d[k]) for k in d if k in known - {"Q", "R", "P0"}})
        return cls(
            Q=np.array(d["Q"], dtype=float) if "Q" in d else base.Q,
            R=np.array(d["R"], dtype=float) if "R" in d else base.R,
            P0=np.array(d["P0"], dtype=float) if "P0" in d else base.P0,
        )

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {"Q": self.Q.tolist(), "R": self.R.tolist(), "P0": self.P0.tolist()}


@dataclass
class FusionState:
    x: np.ndarray
    P: np.ndarray

    @classmethod
    def initial(cls, q: Quaternion, cfg: NoiseConfig, bias=(0.0, 0.0, 0.0)):
        return cls(np.concatenate([q.as_array(), np.asarray(bias, dtype=float)]), cfg.P0.copy())

    @property
    def quaternion(self) -> Quaternion:
        return Quaternion.from_array(self.x[:4])

    @property
    def bias(self) -> np.ndarray:
        return self.x[4:].copy()

    def copy(self):
        return FusionState(self.x.copy(), self.P.copy())


@dataclass(frozen=True)
class AttitudeMeasurement:
    z: np.ndarray
    t_s: float = 0.0

    @classmethod
    def from_quaternion(cls, q: Quaternion, t_s=0.0):
        return cls(q.as_array(), t_s)


@dataclass(frozen=True)
class AhrsLogRecord:
    t_s: float
    quaternion: Quaternion
    euler: EulerAngles
    bias: tuple
    kind: str  # "time", "measurement" or "rejected"

    def csv_row(self):
        roll, pitch, yaw = self.euler.degrees()
        q = self.quaternion
        values = [self.t_s, q.e0, q.e1, q.e2, q.e3, roll, pitch, yaw, *self.bias]
        return [_fmt(v) for v in values] + [self.kind]


def _fmt(v):
    return format(float(v), ".10g")


def build_transition(q_k, dt_s):
    """Transition ``A_k`` (7x7) and input ``B_k`` (7x3) linearized at ``q_k``.

    ``A_k x + B_k u`` equals ``x + dt * [quat_rate(q, u - b); 0]``: the bias is
    a random constant and enters the quaternion rows with the opposite sign
    of the gyro input.
    """
    q = q_k.as_array() if isinstance(q_k, Quaternion) else np.asarray(q_k, dtype=float)
    half = 0.5 * dt_s * quat_rate_matrix(q)
    A = np.eye(7)
    A[:4, 4:] = -half
    B = np.zeros((7, 3))
    B[:4, :] = half
    return A, B


def _symmetrize(P):
    return 0.5 * (P + P.T)


def time_update(s: FusionState, u: BodyRates, cfg: NoiseConfig, dt_s) -> FusionState:
    """Project state and covariance ahead one step.

    The quaternion is advanced with the same renormalized first-order step
    as :func:`integrate_attitude`, which is exactly ``A x + B u`` followed by
    renormalization.
    """
    u = u.as_array() if isinstance(u, BodyRates) else np.asarray(u, dtype=float)
    A, _ = build_transition(s.x[:4], dt_s)
    x = s.x.copy()
    x[:4] = propagate_quat(s.x[:4], u - s.x[4:], dt_s)
    P = _symmetrize(A @ s.P @ A.T + cfg.Q)
    return FusionState(x, P)


def measurement_update(s: FusionState, z: AttitudeMeasurement, cfg: NoiseConfig) -> FusionState:
    zq = np.asarray(z.z, dtype=float)
    if zq @ s.x[:4] < 0.0:
        zq = -zq
    S = s.P[:4, :4] + cfg.R
    try:
        cond = np.linalg.cond(S)
        if not math.isfinite(cond) or cond > _MAX_INNOVATION_COND:
            raise NumericallyDegenerateError(f"innovation covariance is singular (cond={cond:.3g})")
        # K = P H^T S^-1, with S symmetric
        K = np.linalg.solve(S, s.P[:4, :]).T
    except np.linalg.LinAlgError as exc:
        raise NumericallyDegenerateError(f"innovation covariance is singular: {exc}") from None
    x = s.x + K @ (zq - s.x[:4])
    x[:4] /= np.linalg.norm(x[:4])
    P = _symmetrize((np.eye(7) - K @ _H) @ s.P)
    return FusionState(x, P)


@dataclass(frozen=True)
class Rates:
    imu_hz: float = 250.0
    att_hz: float = 50.0
    meas_hz: float = 4.0
    mag_hz: float = 50.0

    def __post_init__(self):
        for name in ("imu_hz", "att_hz", "meas_hz", "mag_hz"):
            if not getattr(self, name) > 0.0:
                raise InvalidInputError(f"rate {name} must be positive")
        ratio = self.imu_hz / self.att_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise InvalidInputError("IMU rate must be an integer multiple of the attitude rate")

    @property
    def decimation(self):
        return int(round(self.imu_hz / self.att_hz))

    @classmethod
    def parse(cls, text):
        """Parse ``"imu:250,att:50,meas:4"`` (any subset of imu/att/meas/mag)."""
        kw = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, val = part.partition(":")
            if not sep or key not in ("imu", "att", "meas", "mag"):
                raise InvalidInputError(f"bad rate entry {part!r}; expected imu|att|meas|mag:<Hz>")
            try:
                kw[f"{key}_hz"] = float(val)
            except ValueError:
                raise InvalidInputError(f"bad rate value {val!r}") from None
        return cls(**kw)

    def to_text(self):
        return f"imu:{self.imu_hz:g},att:{self.att_hz:g},meas:{self.meas_hz:g},mag:{self.mag_hz:g}"


@dataclass
class AhrsRun:
    records: list = field(default_factory=list)
    imu_samples: int = 0
    time_updates: int = 0
    measurement_updates: int = 0
    rejected_measurements: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


class AhrsSession:
    """Single-owner fusion state machine fed one sensor record at a time."""

    def __init__(
        self,
        cfg: NoiseConfig | None = None,
        ref: ReferencePair | None = None,
        *,
        rates: Rates = Rates(),
        filter_spec: FilterSpec | None = None,
        measurement_updates=True,
        on_update=None,
    ):
        self.cfg = cfg or NoiseConfig.default()
        self.ref = ref or ReferencePair()
        self.rates = rates
        spec = filter_spec or FilterSpec(5.0, rates.imu_hz)
        self.conditioner = ImuConditioner(spec)
        # the magnetometer gets the same cutoff so that both TRIAD vectors
        # carry the same group delay as the integrated gyro
        self._mag_filters = [design_butterworth(FilterSpec(spec.cutoff_hz, rates.mag_hz)) for _ in range(3)]
        self.measurement_updates = measurement_updates
        self.on_update = on_update
        self.state: FusionState | None = None
        self.run = AhrsRun()
        self._last_t = -math.inf
        self._acc = None
        self._gyro = None
        self._mag = None
        self._gps_vel = None
        self._gps_acc = None
        self._gps_acc_lead = np.zeros(3)
        # low-frequency group delay of the 2nd-order Butterworth, sqrt(2) / wc
        self._delay = math.sqrt(2.0) / (2.0 * math.pi * spec.cutoff_hz)
        self._last_meas_t = None
        self._dt_att = rates.decimation / rates.imu_hz

    def feed(self, rec):
        if rec.t_s < self._last_t:
            raise InputOrderError(f"timestamp {rec.t_s} after {self._last_t}")
        self._last_t = rec.t_s
        if rec.kind == "imu":
            self._on_imu(rec)
        elif rec.kind == "mag":
            self._mag = np.array([filter_step(f, float(x)) for f, x in zip(self._mag_filters, rec.mag)])
        elif rec.kind == "gps":
            self._on_gps(rec)
        else:
            raise InvalidInputError(f"unknown record kind {rec.kind!r}")

    def _emit(self, t, kind):
        s = self.state
        q = s.quaternion
        self.run.records.append(AhrsLogRecord(t, q, quat_to_euler(q), tuple(float(b) for b in s.x[4:]), kind))

    def _on_imu(self, rec):
        self._acc, self._gyro = self.conditioner.step(rec.acc, rec.gyro)
        self.run.imu_samples += 1
        if self.state is None or self.run.imu_samples % self.rates.decimation:
            return
        prior = self.state
        self.state = time_update(prior, self._gyro, self.cfg, self._dt_att)
        self.run.time_updates += 1
        if self.on_update is not None:
            self.on_update("time", prior, self.state)
        self._emit(rec.t_s, "time")

    def _on_gps(self, rec):
        v = np.asarray(rec.vel_ned, dtype=float)
        prev_acc = self._gps_acc
        if self._gps_vel is not None and rec.t_s > self._gps_vel[0]:
            dt = rec.t_s - self._gps_vel[0]
            self._gps_acc = (v - self._gps_vel[1]) / dt
            if prev_acc is not None:
                # the difference is the mean over the last interval; shift it
                # forward to the epoch of the filtered IMU channels
                lead = 0.5 * dt - self._delay
                self._gps_acc_lead = self._gps_acc + (self._gps_acc - prev_acc) * (lead / dt)
            else:
                self._gps_acc_lead = self._gps_acc
        self._gps_vel = (rec.t_s, v)
        self._maybe_measure(rec)

    def _aiding(self, q):
        """Kinematic aiding matched to the delayed, filtered IMU sample."""
        a_ned = self._gps_acc_lead
        v_ned = self._gps_vel[1] - self._delay * a_ned
        C = quat_to_dcm(q)
        w = self._gyro - self.state.x[4:]
        v_b = C.T @ v_ned
        # a_dynamic + w x v must equal the body-frame inertial acceleration
        a_dyn = C.T @ a_ned - np.cross(w, v_b)
        return KinematicAiding(BodyRates.from_array(w), tuple(v_b), tuple(a_dyn))

    def _triad_quat(self, aid):
        g_body = extract_gravity(self._acc, aid).as_array()
        return dcm_to_quat(triad(g_body, self._mag, self.ref))

    def _maybe_measure(self, rec):
        if self._acc is None or self._mag is None:
            return
        period = 1.0 / self.rates.meas_hz
        if self._last_meas_t is not None and rec.t_s - self._last_meas_t < period - 1e-6:
            return
        if self.state is None:
            try:
                q0 = self._triad_quat(KinematicAiding())
            except DegenerateGeometryError:
                return
            self.state = FusionState.initial(q0, self.cfg)
        self._last_meas_t = rec.t_s
        if not self.measurement_updates:
            return
        try:
            z = self._triad_quat(self._aiding(self.state.quaternion))
        except DegenerateGeometryError:
            self.run.rejected_measurements += 1
            self._emit(rec.t_s, "rejected")
            return
        prior = self.state
        self.state = measurement_update(prior, AttitudeMeasurement.from_quaternion(z, rec.t_s), self.cfg)
        self.run.measurement_updates += 1
        if self.on_update is not None:
            self.on_update("measurement", prior, self.state)
        self._emit(rec.t_s, "measurement")


def run_ahrs(sensor_log, cfg: NoiseConfig | None = None, ref: ReferencePair | None = None, **kwargs) -> AhrsRun:
    """Run the full multirate pipeline over a time-sorted sensor record stream.

    Keyword arguments are passed to :class:`AhrsSession` (``rates``,
    ``filter_spec``, ``measurement_updates``, ``on_update``).
    """
    session = AhrsSession(cfg, ref, **kwargs)
    for rec in sensor_log:
        session.feed(rec)
    return session.run


def write_attitude_csv(records, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTITUDE_CSV_HEADER)
        for rec in records:
            w.writerow(rec.csv_row())


def read_attitude_csv(path):
    out = []
    with open(Path(path), encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            q = Quaternion(*(float(row[k]) for k in ("e0", "e1", "e2", "e3")))
            euler = EulerAngles.from_degrees(float(row["roll_deg"]), float(row["pitch_deg"]), float(row["yaw_deg"]))
            bias = tuple(float(row[k]) for k in ("bp_rps", "bq_rps", "br_rps"))
            out.append(AhrsLogRecord(float(row["t_s"]), q, euler, bias, row["kind"]))
    return out
