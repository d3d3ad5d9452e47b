"""Desk-scale UAV aerial-survey toolkit.

Attitude representations and kinematics, gravity/magnetic attitude fixes,
Butterworth sensor conditioning, a multirate quaternion Kalman AHRS, a
seeded sensor simulator, a waypoint autopilot, a lawnmower survey planner
and a photo-footprint coverage indexer.
"""

from .attitude import (
    BodyRates,
    EulerAngles,
    Quaternion,
    dcm_to_euler,
    dcm_to_quat,
    euler_to_dcm,
    euler_to_quat,
    integrate_attitude,
    propagate_quat,
    quat_to_dcm,
    quat_to_euler,
)
from .absolute import ReferencePair, roll_pitch_from_gravity, triad, yaw_from_mag
from .autopilot import AutopilotGains, KinematicAircraft, Waypoint, simulate_mission
from .errors import UavkitError
from .fusion import NoiseConfig, Rates, run_ahrs
from .indexer import PhotoMetadata, coverage_analysis, project_footprint
from .planner import AreaBoundary, CameraSpec, PlanParams, generate_lawnmower
from .sim import Segment, SensorErrorModel, generate_trajectory, simulate_sensors

__version__ = "0.1.0"
