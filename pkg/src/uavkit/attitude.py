"""Attitude representations and rate kinematics.

Conventions used throughout the package:

* Navigation frame is North-East-Down, body frame is forward-right-down.
* ``C_bn`` (a plain 3x3 ``numpy`` array) rotates body vectors into the
  navigation frame: ``v_n = C_bn @ v_b``.
* Euler angles follow the aerospace yaw-pitch-roll sequence,
  ``C_bn = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
* Quaternions are scalar first, ``(e0, e1, e2, e3)``, Hamilton product,
  canonicalized to ``e0 >= 0`` on construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GimbalLockWarning, InvalidInputError, NormalizationWarning, SingularityError

GRAVITY = 9.80665

# Euler-rate singularity guard, |pitch| must stay below this.
EULER_PITCH_LIMIT_RAD = math.radians(89.0)

_GIMBAL_TOL = 1e-9


def wrap_angle(angle):
    """Wrap an angle (or array of angles) to [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class EulerAngles:
    roll_rad: float
    pitch_rad: float
    yaw_rad: float

    @classmethod
    def from_degrees(cls, roll_deg, pitch_deg, yaw_deg):
        return cls(math.radians(roll_deg), math.radians(pitch_deg), math.radians(yaw_deg))

    def degrees(self):
        return (
            math.degrees(self.roll_rad),
            math.degrees(self.pitch_rad),
            math.degrees(self.yaw_rad),
        )

    def as_array(self):
        return np.array([self.roll_rad, self.pitch_rad, self.yaw_rad])


@dataclass(frozen=True)
class BodyRates:
    p_rps: float
    q_rps: float
    r_rps: float

    @classmethod
    def from_array(cls, w):
        return cls(float(w[0]), float(w[1]), float(w[2]))

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0)

    def as_array(self):
        return np.array([self.p_rps, self.q_rps, self.r_rps])


@dataclass(frozen=True)
class AxisAngle:
    axis: tuple
    angle_rad: float

    def __post_init__(self):
        object.__setattr__(self, "axis", tuple(float(a) for a in self.axis))


@dataclass(frozen=True)
class Quaternion:
    """Scalar-first attitude quaternion with canonical sign ``e0 >= 0``.

    The constructor does not normalize; every operation in this module that
    produces a quaternion does.
    """

    e0: float
    e1: float
    e2: float
    e3: float

    def __post_init__(self):
        if self.e0 < 0.0:
            object.__setattr__(self, "e0", -self.e0)
            object.__setattr__(self, "e1", -self.e1)
            object.__setattr__(self, "e2", -self.e2)
            object.__setattr__(self, "e3", -self.e3)

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q):
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    def as_array(self):
        return np.array([self.e0, self.e1, self.e2, self.e3])

    def norm(self):
        return math.sqrt(self.e0**2 + self.e1**2 + self.e2**2 + self.e3**2)

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise InvalidInputError("cannot normalize a zero quaternion")
        return Quaternion(self.e0 / n, self.e1 / n, self.e2 / n, self.e3 / n)

    def conjugate(self):
        # stays canonical: e0 unchanged
        return Quaternion(self.e0, -self.e1, -self.e2, -self.e3)

    def __mul__(self, other):
        a0, a1, a2, a3 = self.e0, self.e1, self.e2, self.e3
        b0, b1, b2, b3 = other.e0, other.e1, other.e2, other.e3
        return Quaternion(
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        )


def _as_quat_array(q):
    if isinstance(q, Quaternion):
        return q.as_array()
    return np.asarray(q, dtype=float)


def _as_rates_array(w):
    if isinstance(w, BodyRates):
        return w.as_array()
    return np.asarray(w, dtype=float)


def skew(v):
    """Cross-product matrix: ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rot_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(C, tol=1e-9):
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3) or not np.all(np.isfinite(C)):
        return False
    return (
        np.linalg.norm(C.T @ C - np.eye(3)) < tol and abs(np.linalg.det(C) - 1.0) < tol
    )


def axis_angle_to_quat(aa: AxisAngle) -> Quaternion:
    axis = np.asarray(aa.axis, dtype=float)
    n = np.linalg.norm(axis)
    if axis.shape != (3,) or abs(n - 1.0) > 1e-6:
        raise InvalidInputError(f"rotation axis must be a unit 3-vector, got norm {n:.3g}")
    axis = axis / n
    half = 0.5 * aa.angle_rad
    s = math.sin(half)
    return Quaternion(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s).normalized()


def euler_to_dcm(e: EulerAngles) -> np.ndarray:
    cr, sr = math.cos(e.roll_rad), math.sin(e.roll_rad)
    cp, sp = math.cos(e.pitch_rad), math.sin(e.pitch_rad)
    cy, sy = math.cos(e.yaw_rad), math.sin(e.yaw_rad)
    return np.array(
        [
            [cp * cy, -cr * sy + sr * sp * cy, sr * sy + cr * sp * cy],
            [cp * sy, cr * cy + sr * sp * sy, -sr * cy + cr * sp * sy],
            [-sp, sr * cp, cr * cp],
        ]
    )


def dcm_to_euler(C) -> EulerAngles:
    """Extract yaw-pitch-roll angles from ``C_bn``.

    At gimbal lock (``|c31| >= 1 - 1e-9``) a :class:`GimbalLockWarning` is
    emitted, pitch is clamped just inside +-90 degrees, roll is set to zero
    and the remaining yaw-minus-roll combination is assigned to yaw.
    """
    C = np.asarray(C, dtype=float)
    c31 = C[2, 0]
    if abs(c31) >= 1.0 - _GIMBAL_TOL:
        warnings.warn(
            f"pitch at gimbal lock (c31={c31:.12f}); roll set to 0", GimbalLockWarning, stacklevel=2
        )
        pitch = -math.copysign(math.pi / 2 - _GIMBAL_TOL, c31)
        yaw = math.atan2(-C[0, 1], C[1, 1])
        return EulerAngles(0.0, pitch, wrap_angle(yaw))
    pitch = -math.asin(c31)
    roll = math.atan2(C[2, 1], C[2, 2])
    yaw = math.atan2(C[1, 0], C[0, 0])
    return EulerAngles(wrap_angle(roll), pitch, wrap_angle(yaw))


def dcm_to_quat(C) -> Quaternion:
    C = np.asarray(C, dtype=float)
    c11, c12, c13 = C[0]
    c21, c22, c23 = C[1]
    c31, c32, c33 = C[2]
    trace = c11 + c22 + c33
    # e0 > 0.25 <=> 1 + trace > 0.25: direct formula is well conditioned there
    if 1.0 + trace > 0.25:
        e0 = 0.5 * math.sqrt(1.0 + trace)
        k = 1.0 / (4.0 * e0)
        q = (e0, k * (c32 - c23), k * (c13 - c31), k * (c21 - c12))
    elif c11 >= c22 and c11 >= c33:
        e1 = 0.5 * math.sqrt(max(0.0, 1.0 + c11 - c22 - c33))
        k = 1.0 / (4.0 * e1)
        q = (k * (c32 - c23), e1, k * (c12 + c21), k * (c13 + c31))
    elif c22 >= c33:
        e2 = 0.5 * math.sqrt(max(0.0, 1.0 - c11 + c22 - c33))
        k = 1.0 / (4.0 * e2)
        q = (k * (c13 - c31), k * (c12 + c21), e2, k * (c23 + c32))
    else:
        e3 = 0.5 * math.sqrt(max(0.0, 1.0 - c11 - c22 + c33))
        k = 1.0 / (4.0 * e3)
        q = (k * (c21 - c12), k * (c13 + c31), k * (c23 + c32), e3)
    return Quaternion(*q).normalized()


def quat_to_dcm(q: Quaternion) -> np.ndarray:
    if not isinstance(q, Quaternion):
        q = Quaternion.from_array(q)
    n = q.norm()
    if abs(n - 1.0) > 1e-6:
        warnings.warn(f"quaternion norm {n:.9f} renormalized", NormalizationWarning, stacklevel=2)
    e0, e1, e2, e3 = q.normalized().as_array()
    return np.array(
        [
            [e0 * e0 + e1 * e1 - e2 * e2 - e3 * e3, 2 * (e1 * e2 - e0 * e3), 2 * (e1 * e3 + e0 * e2)],
            [2 * (e1 * e2 + e0 * e3), e0 * e0 - e1 * e1 + e2 * e2 - e3 * e3, 2 * (e2 * e3 - e0 * e1)],
            [2 * (e1 * e3 - e0 * e2), 2 * (e2 * e3 + e0 * e1), e0 * e0 - e1 * e1 - e2 * e2 + e3 * e3],
        ]
    )


def quat_to_euler(q: Quaternion) -> EulerAngles:
    return dcm_to_euler(quat_to_dcm(q))


def euler_to_quat(e: EulerAngles) -> Quaternion:
    return dcm_to_quat(euler_to_dcm(e))


def euler_rates(e: EulerAngles, w: BodyRates) -> np.ndarray:
    """Roll, pitch and yaw rates (rad/s) produced by body rates ``w``."""
    if abs(e.pitch_rad) >= EULER_PITCH_LIMIT_RAD:
        raise SingularityError(
            f"Euler rates undefined near pitch 90 deg (pitch={math.degrees(e.pitch_rad):.3f} deg)"
        )
    sr, cr = math.sin(e.roll_rad), math.cos(e.roll_rad)
    tp = math.tan(e.pitch_rad)
    secp = 1.0 / math.cos(e.pitch_rad)
    M = np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr * secp, cr * secp],
        ]
    )
    return M @ _as_rates_array(w)


def body_rates_from_euler_rates(e: EulerAngles, euler_dot) -> np.ndarray:
    """Inverse of :func:`euler_rates` (defined for every pitch)."""
    roll_dot, pitch_dot, yaw_dot = euler_dot
    sr, cr = math.sin(e.roll_rad), math.cos(e.roll_rad)
    sp, cp = math.sin(e.pitch_rad), math.cos(e.pitch_rad)
    return np.array(
        [
            roll_dot - yaw_dot * sp,
            pitch_dot * cr + yaw_dot * sr * cp,
            -pitch_dot * sr + yaw_dot * cr * cp,
        ]
    )


def dcm_rate(C, w: BodyRates) -> np.ndarray:
    return np.asarray(C, dtype=float) @ skew(_as_rates_array(w))


def quat_rate_matrix(q) -> np.ndarray:
    """4x3 matrix ``Xi(q)`` with ``q_dot = 0.5 * Xi(q) @ [p, q, r]``."""
    e0, e1, e2, e3 = _as_quat_array(q)
    return np.array(
        [
            [-e1, -e2, -e3],
            [e0, -e3, e2],
            [e3, e0, -e1],
            [-e2, e1, e0],
        ]
    )


def quat_rate(q, w: BodyRates) -> np.ndarray:
    return 0.5 * quat_rate_matrix(q) @ _as_rates_array(w)


def propagate_quat(q, w, dt_s) -> np.ndarray:
    """One renormalized first-order step on raw arrays (sign is not canonicalized).

    Filters that carry covariance alongside the quaternion use this so that
    the state never flips sign underneath its cross-covariances.
    """
    q = _as_quat_array(q)
    q_next = q + dt_s * quat_rate(q, w)
    return q_next / math.sqrt(q_next @ q_next)


def integrate_attitude(q: Quaternion, w: BodyRates, dt_s) -> Quaternion:
    if not dt_s > 0.0:
        raise InvalidInputError(f"dt_s must be positive, got {dt_s}")
    return Quaternion.from_array(propagate_quat(q, w, dt_s))


def quat_angle_between(qa, qb) -> float:
    """Rotation angle (rad) separating two attitudes; sign-insensitive."""
    a = _as_quat_array(qa)
    b = _as_quat_array(qb)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    if a @ b < 0.0:
        b = -b
    # chord form keeps full precision for tiny angles, where acos(a.b) does not
    return 4.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))


def dcm_angle_between(Ca, Cb) -> float:
    """Rotation angle (rad) of ``Ca.T @ Cb``."""
    R = np.asarray(Ca).T @ np.asarray(Cb)
    # arccos is ill-conditioned near zero; use the skew part as well
    s = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (np.trace(R) - 1.0)
    return math.atan2(s, c)


def integrate_euler_angles(e: EulerAngles, w: BodyRates, dt_s) -> EulerAngles:
    """Advance Euler angles one step with the rate ``w`` held constant.

    Uses a two-stage (Heun) step: first-order stepping of the Euler-angle
    equations carries O(dt) drift of its own, which would swamp comparisons
    against the DCM and quaternion integrators.
    """
    a = e.as_array()
    k1 = euler_rates(e, w)
    mid = EulerAngles(*(a + dt_s * k1))
    k2 = euler_rates(mid, w)
    r, p, y = a + 0.5 * dt_s * (k1 + k2)
    return EulerAngles(wrap_angle(r), p, wrap_angle(y))


def orthonormalize(C) -> np.ndarray:
    """Nearest rotation matrix (polar factor) to ``C``."""
    U, _, Vt = np.linalg.svd(np.asarray(C, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def integrate_dcm(C, w: BodyRates, dt_s) -> np.ndarray:
    """First-order DCM step followed by re-orthonormalization."""
    C = np.asarray(C, dtype=float)
    return orthonormalize(C + dt_s * dcm_rate(C, w))
