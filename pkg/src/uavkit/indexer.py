"""Photo footprints from shutter-time poses and raster coverage grading.

Footprints are the four corner rays of the camera pyramid, rotated by the
shot attitude and cut by a flat ground plane. Coverage rasterizes the
survey rectangle and marks a cell when its centre lies in any footprint;
uncovered cells are grouped into 4-connected blank spots.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .attitude import EulerAngles, euler_to_dcm
from .errors import FootprintUnboundedError, FormatError, InvalidInputError
from .planner import AreaBoundary, CameraSpec, FlightPlan

SHOTS_CSV_HEADER = ("photo_id", "t_s", "lat_deg", "lon_deg", "alt_m", "roll_deg", "pitch_deg", "yaw_deg")
DEFAULT_GRID_RES_M = 5.0
_MIN_DOWN = 1e-9


@dataclass(frozen=True)
class PhotoMetadata:
    photo_id: str
    t_s: float
    lat_deg: float
    lon_deg: float
    alt_m: float
    roll_rad: float = 0.0
    pitch_rad: float = 0.0
    yaw_rad: float = 0.0

    def __post_init__(self):
        vals = (self.t_s, self.lat_deg, self.lon_deg, self.alt_m, self.roll_rad, self.pitch_rad, self.yaw_rad)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"photo {self.photo_id}: pose must be finite")

    @property
    def euler(self):
        return EulerAngles(self.roll_rad, self.pitch_rad, self.yaw_rad)


@dataclass(frozen=True)
class FootprintPolygon:
    """Ground quadrilateral as (east, north) corners, counter-clockwise.

    ``center`` is where the boresight ray meets the ground; under tilt it
    differs from the area centroid because the far edge is wider.
    """

    corners: np.ndarray
    center: np.ndarray | None = None

    @property
    def area_m2(self):
        x, y = self.corners[:, 0], self.corners[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def centroid(self):
        x, y = self.corners[:, 0], self.corners[:, 1]
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        a = 0.5 * cross.sum()
        return np.array([((x + np.roll(x, -1)) * cross).sum(), ((y + np.roll(y, -1)) * cross).sum()]) / (6.0 * a)

    def contains(self, east, north):
        """Vectorized point-in-convex-polygon test (boundary counts as inside)."""
        east = np.asarray(east, dtype=float)
        north = np.asarray(north, dtype=float)
        inside = np.ones(np.broadcast(east, north).shape, dtype=bool)
        c = self.corners
        for i in range(len(c)):
            (x0, y0), (x1, y1) = c[i], c[(i + 1) % len(c)]
            inside &= (x1 - x0) * (north - y0) - (y1 - y0) * (east - x0) >= -1e-9
        return inside


@dataclass
class BlankSpot:
    cells: int
    bbox_m: tuple  # (east_min, north_min, east_max, north_max)


@dataclass
class CoverageReport:
    coverage: float
    grid_res_m: float
    covered_cells: int
    total_cells: int
    blank_spots: list
    footprint_areas_m2: dict

    def to_dict(self):
        return {
            "coverage": self.coverage,
            "grid_res_m": self.grid_res_m,
            "covered_cells": self.covered_cells,
            "total_cells": self.total_cells,
            "blank_spots": [
                {"cells": b.cells, "bbox_m": [round(v, 6) for v in b.bbox_m]} for b in self.blank_spots
            ],
            "footprint_areas_m2": {k: round(v, 6) for k, v in self.footprint_areas_m2.items()},
        }


def project_footprint(meta: PhotoMetadata, cam: CameraSpec, ground_alt_m, area: AreaBoundary) -> FootprintPolygon:
    """Corner-ray/ground intersections in the area's tangent plane.

    The camera looks along body +z (down when level); the vertical FOV spans
    body x (forward) and the horizontal FOV body y (right).
    """
    h = meta.alt_m - ground_alt_m
    if not h > 0.0:
        raise InvalidInputError(f"photo {meta.photo_id}: altitude must be above ground")
    tx, ty = math.tan(cam.vfov_rad / 2.0), math.tan(cam.hfov_rad / 2.0)
    # body-frame corners: front-right, front-left, rear-left, rear-right
    rays = np.array([[tx, ty, 1.0], [tx, -ty, 1.0], [-tx, -ty, 1.0], [-tx, ty, 1.0], [0.0, 0.0, 1.0]])
    nav = rays @ euler_to_dcm(meta.euler).T
    if np.any(nav[:4, 2] <= _MIN_DOWN):
        raise FootprintUnboundedError(f"photo {meta.photo_id}: a corner ray does not reach the ground")
    scale = h / nav[:, 2]
    n0, e0, _ = area.ltp.to_ned(meta.lat_deg, meta.lon_deg)
    pts = np.column_stack([e0 + nav[:, 1] * scale, n0 + nav[:, 0] * scale])
    corners, center = pts[:4], pts[4]
    poly = FootprintPolygon(corners, center)
    if poly.area_m2 < 0:
        poly = FootprintPolygon(corners[::-1].copy(), center)
    return poly


def coverage_analysis(shots, cam: CameraSpec, area: AreaBoundary, grid_res_m=DEFAULT_GRID_RES_M, ground_alt_m=0.0):
    if not grid_res_m > 0.0:
        raise InvalidInputError("grid resolution must be positive")
    width, height = area.size_m
    nx = max(1, math.ceil(width / grid_res_m - 1e-9))
    ny = max(1, math.ceil(height / grid_res_m - 1e-9))
    dx, dy = width / nx, height / ny
    xc = (np.arange(nx) + 0.5) * dx
    yc = (np.arange(ny) + 0.5) * dy
    covered = np.zeros((ny, nx), dtype=bool)
    areas = {}
    for shot in shots:
        poly = project_footprint(shot, cam, ground_alt_m, area)
        areas[shot.photo_id] = poly.area_m2
        lo, hi = poly.corners.min(axis=0), poly.corners.max(axis=0)
        i0, i1 = np.searchsorted(xc, lo[0]), np.searchsorted(xc, hi[0], side="right")
        j0, j1 = np.searchsorted(yc, lo[1]), np.searchsorted(yc, hi[1], side="right")
        if i0 >= i1 or j0 >= j1:
            continue
        X, Y = np.meshgrid(xc[i0:i1], yc[j0:j1])
        covered[j0:j1, i0:i1] |= poly.contains(X, Y)

    labels, n = ndimage.label(~covered)  # default structure is 4-connected
    spots = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        cells = int(np.count_nonzero(labels[sl] == k))
        rows, cols = sl
        spots.append(BlankSpot(cells, (cols.start * dx, rows.start * dy, cols.stop * dx, rows.stop * dy)))
    n_cov = int(covered.sum())
    return CoverageReport(n_cov / covered.size, grid_res_m, n_cov, int(covered.size), spots, areas)


def ideal_shots(plan: FlightPlan, t0_s=0.0):
    """Photo poses for a perfect flight: level, on the line, one per shot spacing."""
    shots = []
    ltp = plan.area.ltp if plan.area is not None else None
    if ltp is None:
        raise InvalidInputError("plan carries no area; cannot place shots")
    t = t0_s
    for line, (a, b) in enumerate(plan.survey_lines()):
        na, ea, _ = ltp.to_ned(a.lat_deg, a.lon_deg)
        nb, eb, _ = ltp.to_ned(b.lat_deg, b.lon_deg)
        length = math.hypot(nb - na, eb - ea)
        steps = round(length / plan.shot_spacing_m) if plan.shot_spacing_m > 0 else 0
        yaw = math.atan2(eb - ea, nb - na)
        for j in range(steps + 1):
            f = j / steps if steps else 0.0
            lat, lon, _ = ltp.to_geodetic(na + f * (nb - na), ea + f * (eb - ea))
            shots.append(PhotoMetadata(f"L{line:03d}_{j:04d}", t, lat, lon, a.alt_m, 0.0, 0.0, yaw))
            t += plan.shutter_interval_s
    return shots


def write_shots_csv(shots, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHOTS_CSV_HEADER)
        for s in shots:
            vals = (s.t_s, s.lat_deg, s.lon_deg, s.alt_m, math.degrees(s.roll_rad), math.degrees(s.pitch_rad),
                    math.degrees(s.yaw_rad))
            w.writerow([s.photo_id] + [format(v, ".12g") for v in vals])


def read_shots_csv(path):
    shots = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SHOTS_CSV_HEADER:
            raise FormatError(f"expected header {','.join(SHOTS_CSV_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) != len(SHOTS_CSV_HEADER):
                    raise ValueError(f"expected {len(SHOTS_CSV_HEADER)} fields, got {len(row)}")
                t, lat, lon, alt, r, p, y = (float(v) for v in row[1:])
                shots.append(
                    PhotoMetadata(row[0], t, lat, lon, alt, math.radians(r), math.radians(p), math.radians(y))
                )
            except ValueError as exc:
                raise FormatError(f"bad shot record: {exc}", line=lineno, path=path) from None
    return shots


def write_coverage_json(report: CoverageReport, path, min_coverage=None):
    d = report.to_dict()
    if min_coverage is not None:
        d["min_coverage"] = min_coverage
        d["passed"] = report.coverage >= min_coverage
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_index_json(shots, cam: CameraSpec, area: AreaBoundary, path, ground_alt_m=0.0, image_ext=".jpg"):
    """Map every photo id to its expected image file and footprint corners (lat/lon)."""
    ltp = area.ltp
    entries = {}
    for s in shots:
        poly = project_footprint(s, cam, ground_alt_m, area)
        corners = []
        for east, north in poly.corners:
            lat, lon, _ = ltp.to_geodetic(north, east)
            corners.append([round(lat, 9), round(lon, 9)])
        entries[s.photo_id] = {"image": f"{s.photo_id}{image_ext}", "t_s": s.t_s, "footprint_latlon": corners}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"photos": entries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
