"""Single-shot attitude from gravity and magnetic field observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attitude import GRAVITY, BodyRates, wrap_angle
from .errors import (
    DegenerateGeometryError,
    IndeterminateHeadingError,
    InvalidInputError,
    InvalidMeasurementError,
    SingularityError,
)

DEFAULT_INCLINATION_DEG = 30.0
DEFAULT_DECLINATION_DEG = 0.0

_CLAMP_TOL = 1e-6
# roll/pitch extraction refuses tilt this close to vertical
_PITCH_SINGULAR_COS = 1e-9


@dataclass(frozen=True)
class GravityVector:
    gx: float
    gy: float
    gz: float

    @property
    def g(self):
        return math.sqrt(self.gx**2 + self.gy**2 + self.gz**2)

    @property
    def quality(self):
        """Deviation of the magnitude from standard gravity, m/s^2."""
        return abs(self.g - GRAVITY)

    def as_array(self):
        return np.array([self.gx, self.gy, self.gz])


@dataclass(frozen=True)
class MagVector:
    mx: float
    my: float
    mz: float

    def __post_init__(self):
        if self.mx == 0.0 and self.my == 0.0 and self.mz == 0.0:
            raise InvalidInputError("magnetic vector must be nonzero")

    def as_array(self):
        return np.array([self.mx, self.my, self.mz])


def magnetic_reference(inclination_deg=DEFAULT_INCLINATION_DEG, declination_deg=DEFAULT_DECLINATION_DEG):
    """Unit NED field vector for a dip (positive down) and declination (positive east)."""
    inc = math.radians(inclination_deg)
    dec = math.radians(declination_deg)
    return np.array([math.cos(inc) * math.cos(dec), math.cos(inc) * math.sin(dec), math.sin(inc)])


@dataclass(frozen=True)
class ReferencePair:
    """Navigation-frame gravity and magnetic reference directions."""

    a_R: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, GRAVITY]))
    m_R: np.ndarray = field(default_factory=magnetic_reference)

    def __post_init__(self):
        a = np.asarray(self.a_R, dtype=float)
        m = np.asarray(self.m_R, dtype=float)
        object.__setattr__(self, "a_R", a)
        object.__setattr__(self, "m_R", m)
        na, nm = np.linalg.norm(a), np.linalg.norm(m)
        if na == 0.0 or nm == 0.0 or np.linalg.norm(np.cross(a / na, m / nm)) <= 1e-6:
            raise DegenerateGeometryError("reference gravity and magnetic vectors are collinear")

    @classmethod
    def from_field(cls, inclination_deg=DEFAULT_INCLINATION_DEG, declination_deg=DEFAULT_DECLINATION_DEG):
        return cls(np.array([0.0, 0.0, GRAVITY]), magnetic_reference(inclination_deg, declination_deg))

    @property
    def declination_rad(self):
        return math.atan2(self.m_R[1], self.m_R[0])


@dataclass(frozen=True)
class KinematicAiding:
    omega: BodyRates = field(default_factory=BodyRates.zero)
    velocity: tuple = (0.0, 0.0, 0.0)
    a_dynamic: tuple = (0.0, 0.0, 0.0)


def extract_gravity(a_measured, aid: KinematicAiding) -> GravityVector:
    """Remove the kinematic terms from an accelerometer reading.

    The accelerometer senses ``a_dynamic + omega x v - g_body``; rearranged,
    ``g_body = a_dynamic + omega x v - a_measured``.
    """
    a = np.asarray(a_measured, dtype=float)
    w = aid.omega.as_array()
    v = np.asarray(aid.velocity, dtype=float)
    g = np.asarray(aid.a_dynamic, dtype=float) + np.cross(w, v) - a
    return GravityVector(*g)


def _checked_ratio(num, den, what):
    r = num / den
    if abs(r) > 1.0 + _CLAMP_TOL:
        raise InvalidMeasurementError(f"{what} ratio {r:.9f} outside [-1, 1]")
    return max(-1.0, min(1.0, r))


def roll_pitch_from_gravity(gv: GravityVector):
    """Return ``(roll_rad, pitch_rad)`` from a body-frame gravity vector.

    Roll comes from an arcsine, so it is only meaningful for ``|roll| <= 90 deg``.
    """
    g = gv.g
    if g == 0.0:
        raise InvalidMeasurementError("zero gravity vector")
    pitch = -math.asin(_checked_ratio(gv.gx, g, "gx/g"))
    cp = math.cos(pitch)
    if cp < _PITCH_SINGULAR_COS:
        raise SingularityError("roll undefined with pitch at +-90 deg")
    roll = math.asin(_checked_ratio(gv.gy, g * cp, "gy/(g cos pitch)"))
    return roll, pitch


def yaw_from_mag(m: MagVector, roll_rad, pitch_rad, declination_rad=0.0):
    """Tilt-compensated heading in [-pi, pi).

    The body-frame field is de-rotated by roll, then pitch, into the local
    level frame; heading is the full-quadrant angle of the leveled horizontal
    components, corrected by the local declination.
    """
    mx, my, mz = m.as_array()
    sr, cr = math.sin(roll_rad), math.cos(roll_rad)
    sp, cp = math.sin(pitch_rad), math.cos(pitch_rad)
    # level = Ry(pitch) @ Rx(roll) @ m_body
    y1 = cr * my - sr * mz
    z1 = sr * my + cr * mz
    xh = cp * mx + sp * z1
    yh = y1
    if math.hypot(xh, yh) < 1e-9:
        raise IndeterminateHeadingError("magnetic vector is vertical in the level frame")
    return wrap_angle(math.atan2(-yh, xh) + declination_rad)


def triad(a_B, m_B, ref: ReferencePair) -> np.ndarray:
    """Body-to-navigation DCM from one gravity and one magnetic observation.

    Gravity is the anchor direction (matched exactly), the magnetic vector
    only fixes the rotation about it.
    """
    i_B, j_B, k_B = _triad_frame(np.asarray(a_B, dtype=float), np.asarray(m_B, dtype=float), "body")
    i_R, j_R, k_R = _triad_frame(ref.a_R, ref.m_R, "reference")
    return np.outer(i_R, i_B) + np.outer(j_R, j_B) + np.outer(k_R, k_B)


def _triad_frame(a, m, label):
    na = np.linalg.norm(a)
    nm = np.linalg.norm(m)
    if na == 0.0 or nm == 0.0:
        raise DegenerateGeometryError(f"{label} observation vector is zero")
    i = a / na
    c = np.cross(i, m / nm)
    nc = np.linalg.norm(c)
    if nc < 1e-9:
        raise DegenerateGeometryError(f"{label} gravity and magnetic vectors are collinear")
    j = c / nc
    k = np.cross(i, j)
    return i, j, k
