"""Flat local tangent plane on a spherical Earth.

Survey areas are a few kilometres across, so a spherical meters-per-degree
conversion anchored at an origin is accurate enough for planning and
coverage work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6371000.0
DEFAULT_ORIGIN = (-6.9146, 107.6098)


def wrap_lon(lon_deg):
    return (lon_deg + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class LocalTangentPlane:
    lat0_deg: float = DEFAULT_ORIGIN[0]
    lon0_deg: float = DEFAULT_ORIGIN[1]
    alt0_m: float = 0.0

    @property
    def m_per_deg_lat(self):
        return math.radians(1.0) * EARTH_RADIUS_M

    @property
    def m_per_deg_lon(self):
        return math.radians(1.0) * EARTH_RADIUS_M * math.cos(math.radians(self.lat0_deg))

    def to_ned(self, lat_deg, lon_deg, alt_m=0.0):
        north = (lat_deg - self.lat0_deg) * self.m_per_deg_lat
        east = wrap_lon(lon_deg - self.lon0_deg) * self.m_per_deg_lon
        return north, east, self.alt0_m - alt_m

    def to_geodetic(self, north_m, east_m, down_m=0.0):
        lat = self.lat0_deg + north_m / self.m_per_deg_lat
        lon = wrap_lon(self.lon0_deg + east_m / self.m_per_deg_lon)
        return lat, lon, self.alt0_m - down_m


def bearing_rad(north_m, east_m):
    """Bearing of a horizontal NED displacement, clockwise from north, in [-pi, pi)."""
    b = math.atan2(east_m, north_m)
    return (b + math.pi) % (2.0 * math.pi) - math.pi
