"""Lawnmower survey planning over an axis-aligned rectangle.

Lines run along the chosen direction and are stacked across it. Each line
is flown between two ``survey`` waypoints (the first and last photo
centres) and is bracketed by ``turn`` waypoints: ``large_overshoot_m``
along-track beyond each end, pushed ``small_overshoot_m`` sideways away
from the neighbouring line so the turn between lines stays wide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .autopilot import Waypoint
from .errors import FormatError, InvalidInputError, PlanError
from .geo import LocalTangentPlane

DEFAULT_VIRTUAL_FOCAL_MM = 35.0
DIRECTIONS = ("north-south", "east-west")


@dataclass(frozen=True)
class AreaBoundary:
    lb_lat_deg: float
    lb_lon_deg: float
    rt_lat_deg: float
    rt_lon_deg: float

    def __post_init__(self):
        vals = (self.lb_lat_deg, self.lb_lon_deg, self.rt_lat_deg, self.rt_lon_deg)
        if not all(math.isfinite(v) for v in vals):
            raise PlanError("boundary coordinates must be finite")
        if not (-90 <= self.lb_lat_deg <= 90 and -90 <= self.rt_lat_deg <= 90):
            raise PlanError("boundary latitude out of range")
        if not (self.rt_lat_deg > self.lb_lat_deg and self.rt_lon_deg > self.lb_lon_deg):
            raise PlanError("right-top corner must lie strictly north-east of left-bottom (zero-area boundary?)")

    @classmethod
    def from_size(cls, width_east_m, height_north_m, origin=(-6.9146, 107.6098)):
        """Rectangle of the given size whose left-bottom corner sits at ``origin``."""
        ltp = LocalTangentPlane(*origin)
        lat, lon, _ = ltp.to_geodetic(height_north_m, width_east_m)
        return cls(origin[0], origin[1], lat, lon)

    @property
    def ltp(self) -> LocalTangentPlane:
        """Tangent plane anchored at the left-bottom corner (alt 0)."""
        return LocalTangentPlane(self.lb_lat_deg, self.lb_lon_deg, 0.0)

    @property
    def size_m(self):
        """(east extent, north extent) in the corner-anchored tangent plane."""
        n, e, _ = self.ltp.to_ned(self.rt_lat_deg, self.rt_lon_deg)
        return e, n

    def to_dict(self):
        return {
            "left_bottom": [self.lb_lat_deg, self.lb_lon_deg],
            "right_top": [self.rt_lat_deg, self.rt_lon_deg],
        }

    @classmethod
    def from_dict(cls, d):
        (a, b), (c, e) = d["left_bottom"], d["right_top"]
        return cls(float(a), float(b), float(c), float(e))


@dataclass(frozen=True)
class CameraSpec:
    """Either field-of-view angles or focal length plus sensor size (or both, consistent)."""

    hfov_deg: float | None = None
    vfov_deg: float | None = None
    focal_length_mm: float | None = None
    sensor_w_mm: float | None = None
    sensor_h_mm: float | None = None

    def __post_init__(self):
        has_fov = self.hfov_deg is not None and self.vfov_deg is not None
        has_sensor = None not in (self.focal_length_mm, self.sensor_w_mm, self.sensor_h_mm)
        if not (has_fov or has_sensor):
            raise InvalidInputError("camera needs hfov/vfov or focal length with sensor width/height")
        if has_sensor:
            if min(self.focal_length_mm, self.sensor_w_mm, self.sensor_h_mm) <= 0:
                raise InvalidInputError("focal length and sensor size must be positive")
            h = math.degrees(2 * math.atan(self.sensor_w_mm / (2 * self.focal_length_mm)))
            v = math.degrees(2 * math.atan(self.sensor_h_mm / (2 * self.focal_length_mm)))
            if has_fov:
                if abs(h - self.hfov_deg) > 1e-3 or abs(v - self.vfov_deg) > 1e-3:
                    raise InvalidInputError(
                        f"FOV {self.hfov_deg}x{self.vfov_deg} deg disagrees with sensor/focal ({h:.4f}x{v:.4f} deg)"
                    )
            else:
                object.__setattr__(self, "hfov_deg", h)
                object.__setattr__(self, "vfov_deg", v)
        for name in ("hfov_deg", "vfov_deg"):
            val = getattr(self, name)
            if not 0.0 < val < 180.0:
                raise InvalidInputError(f"{name} must lie in (0, 180)")

    @property
    def hfov_rad(self):
        return math.radians(self.hfov_deg)

    @property
    def vfov_rad(self):
        return math.radians(self.vfov_deg)

    @property
    def has_focal_length(self):
        return self.focal_length_mm is not None

    def to_dict(self):
        d = {"hfov_deg": self.hfov_deg, "vfov_deg": self.vfov_deg}
        if self.has_focal_length:
            d.update(focal_length_mm=self.focal_length_mm, sensor_w_mm=self.sensor_w_mm, sensor_h_mm=self.sensor_h_mm)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {"hfov_deg", "vfov_deg", "focal_length_mm", "sensor_w_mm", "sensor_h_mm"}
        if set(d) - known:
            raise InvalidInputError(f"unknown camera keys: {sorted(set(d) - known)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class PlanParams:
    scale: float  # photo scale denominator, 1:scale
    overlap_h: float = 0.6  # side overlap, sets line spacing
    overlap_v: float = 0.3  # forward overlap, sets shot spacing
    small_overshoot_m: float = 50.0
    large_overshoot_m: float = 150.0
    ground_alt_m: float = 0.0
    direction: str = "north-south"
    groundspeed_mps: float = 20.0
    virtual_focal_mm: float = DEFAULT_VIRTUAL_FOCAL_MM

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidInputError("photo scale must be positive")
        for name in ("overlap_h", "overlap_v"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1)")
        if self.small_overshoot_m < 0 or self.large_overshoot_m < 0:
            raise InvalidInputError("overshoots must be >= 0")
        if self.direction not in DIRECTIONS:
            raise InvalidInputError(f"direction must be one of {DIRECTIONS}")
        if not self.groundspeed_mps > 0:
            raise InvalidInputError("groundspeed must be positive")
        if not self.virtual_focal_mm > 0:
            raise InvalidInputError("virtual focal length must be positive")


@dataclass
class FlightPlan:
    altitude_agl_m: float
    waypoints: list
    shutter_interval_s: float
    footprint_m: tuple  # (cross-track width, along-track height)
    line_spacing_m: float
    shot_spacing_m: float = 0.0
    groundspeed_mps: float = 20.0
    ground_alt_m: float = 0.0
    direction: str = "north-south"
    area: AreaBoundary | None = None
    camera: CameraSpec | None = None
    assumptions: list = field(default_factory=list)

    def __post_init__(self):
        if not self.shutter_interval_s > 0:
            raise PlanError("shutter interval must be positive")
        if not self.waypoints:
            raise PlanError("plan has no waypoints")

    @property
    def line_count(self):
        return sum(1 for a, b in zip(self.waypoints, self.waypoints[1:]) if a.kind == b.kind == "survey")

    def survey_lines(self):
        """(start, end) waypoint pairs of every survey line in flight order."""
        return [(a, b) for a, b in zip(self.waypoints, self.waypoints[1:]) if a.kind == b.kind == "survey"]

    def to_dict(self):
        d = {
            "altitude_agl_m": self.altitude_agl_m,
            "shutter_interval_s": self.shutter_interval_s,
            "footprint_m": list(self.footprint_m),
            "line_spacing_m": self.line_spacing_m,
            "shot_spacing_m": self.shot_spacing_m,
            "groundspeed_mps": self.groundspeed_mps,
            "ground_alt_m": self.ground_alt_m,
            "direction": self.direction,
            "waypoints": [
                {"lat_deg": w.lat_deg, "lon_deg": w.lon_deg, "alt_m": w.alt_m, "kind": w.kind} for w in self.waypoints
            ],
            "assumptions": list(self.assumptions),
        }
        if self.area is not None:
            d["area"] = self.area.to_dict()
        if self.camera is not None:
            d["camera"] = self.camera.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        wps = []
        for i, w in enumerate(d["waypoints"]):
            kind = w.get("kind", "turn")
            if kind not in ("survey", "turn"):
                raise InvalidInputError(f"waypoint {i}: kind must be survey or turn")
            wps.append(Waypoint(float(w["lat_deg"]), float(w["lon_deg"]), float(w["alt_m"]), kind))
        fw, fh = (float(x) for x in d["footprint_m"])
        return cls(
            altitude_agl_m=float(d["altitude_agl_m"]),
            waypoints=wps,
            shutter_interval_s=float(d["shutter_interval_s"]),
            footprint_m=(fw, fh),
            line_spacing_m=float(d["line_spacing_m"]),
            shot_spacing_m=float(d.get("shot_spacing_m", 0.0)),
            groundspeed_mps=float(d.get("groundspeed_mps", 20.0)),
            ground_alt_m=float(d.get("ground_alt_m", 0.0)),
            direction=d.get("direction", "north-south"),
            area=AreaBoundary.from_dict(d["area"]) if "area" in d else None,
            camera=CameraSpec.from_dict(d["camera"]) if "camera" in d else None,
            assumptions=list(d.get("assumptions", [])),
        )


def compute_altitude(cam: CameraSpec, params: PlanParams):
    """Flying height above ground and (cross-track, along-track) footprint in metres."""
    if not params.scale > 0:
        raise InvalidInputError("photo scale must be positive")
    focal_mm = cam.focal_length_mm if cam.has_focal_length else params.virtual_focal_mm
    H = focal_mm / 1000.0 * params.scale
    return H, 2.0 * H * math.tan(cam.hfov_rad / 2.0), 2.0 * H * math.tan(cam.vfov_rad / 2.0)


def compute_shutter_interval(footprint_along_m, vertical_overlap, groundspeed_mps):
    if not 0.0 <= vertical_overlap < 1.0:
        raise InvalidInputError("vertical overlap must lie in [0, 1)")
    if not groundspeed_mps > 0.0:
        raise InvalidInputError("groundspeed must be positive")
    if not footprint_along_m > 0.0:
        raise InvalidInputError("footprint must be positive")
    return footprint_along_m * (1.0 - vertical_overlap) / groundspeed_mps


def _count(extent, footprint, step):
    """Number of intervals of ``step`` needed so footprints of size ``footprint`` span ``extent``."""
    if extent <= footprint:
        return 0
    return math.ceil((extent - footprint) / step - 1e-9)


def generate_lawnmower(area: AreaBoundary, cam: CameraSpec, params: PlanParams) -> FlightPlan:
    H, fw, fh = compute_altitude(cam, params)
    width_e, height_n = area.size_m
    ns = params.direction == "north-south"
    along_extent, cross_extent = (height_n, width_e) if ns else (width_e, height_n)

    spacing = fw * (1.0 - params.overlap_h)
    n_lines = _count(cross_extent, fw, spacing) + 1
    cross0 = 0.5 * (cross_extent - (n_lines - 1) * spacing)

    shot_step = fh * (1.0 - params.overlap_v)
    n_steps = _count(along_extent, fh, shot_step)
    a_lo = 0.5 * (along_extent - n_steps * shot_step)
    a_hi = a_lo + n_steps * shot_step

    L, S = params.large_overshoot_m, params.small_overshoot_m
    alt = params.ground_alt_m + H
    ltp = area.ltp

    def wp(along, cross, kind):
        n, e = (along, cross) if ns else (cross, along)
        return Waypoint.from_ned(ltp, n, e, alt, kind)

    waypoints = []
    for i in range(n_lines):
        c = cross0 + i * spacing
        fwd = i % 2 == 0
        start, end = (a_lo, a_hi) if fwd else (a_hi, a_lo)
        sgn = 1.0 if fwd else -1.0
        entry_c = c + S if i > 0 else c
        exit_c = c - S if i < n_lines - 1 else c
        waypoints += [
            wp(start - sgn * L, entry_c, "turn"),
            wp(start, c, "survey"),
            wp(end, c, "survey"),
            wp(end + sgn * L, exit_c, "turn"),
        ]

    assumptions = [
        "flat terrain at ground_alt_m",
        "footprint_m is (cross-track, along-track); lines are flown between survey waypoints",
    ]
    if not cam.has_focal_length:
        assumptions.append(f"no focal length given: scale interpreted with a {params.virtual_focal_mm:g} mm virtual focal length")
    if n_steps == 0:
        assumptions.append("area shorter than one footprint along-track: one photo per line")

    return FlightPlan(
        altitude_agl_m=H,
        waypoints=waypoints,
        shutter_interval_s=compute_shutter_interval(fh, params.overlap_v, params.groundspeed_mps),
        footprint_m=(fw, fh),
        line_spacing_m=spacing,
        shot_spacing_m=shot_step,
        groundspeed_mps=params.groundspeed_mps,
        ground_alt_m=params.ground_alt_m,
        direction=params.direction,
        area=area,
        camera=cam,
        assumptions=assumptions,
    )


def write_plan(plan: FlightPlan, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2)
        fh.write("\n")


def read_plan(path) -> FlightPlan:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", line=exc.lineno, path=path) from None
    try:
        if not isinstance(d, dict):
            raise ValueError("plan must be a JSON object")
        return FlightPlan.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        raise FormatError(f"bad plan: {msg}", path=path) from None
