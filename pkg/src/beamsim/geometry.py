"""Beam-local geometry and scheduling sectors.

All in-beam computations live in a local tangent plane obtained from an
azimuthal-equidistant projection about the beam center (radial distances
exact, tangential distortion ~(d/R_E)^2/6, negligible for beams a few
hundred km wide).  Axes: x = local east, y = local north.  The angular
coordinate phi is measured counterclockwise from local east in [0, 2pi);
the beam center itself has phi = 0 by convention.

A point's normalized radius is its tangent-plane distance from the beam
center divided by the distance to the beam boundary along the same
azimuth, so the boundary maps to 1 regardless of the beam's shape.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .constants import EARTH_RADIUS_KM, GEO_ALTITUDE_KM
from .errors import GeometryError, ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Beam

TAU = 2.0 * math.pi

BEAM_CENTER_SECTOR = 0  # sector index reserved for the beam-center disc


# ---------------------------------------------------------------------------
# Spherical-earth geodesy
# ---------------------------------------------------------------------------

def project_tangent(center_lat, center_lon, lat, lon):
    """Project lat/lon (degrees) to (x_east, y_north) km about a center point."""
    p1 = math.radians(center_lat)
    l1 = math.radians(center_lon)
    p2 = np.radians(np.asarray(lat, dtype=float))
    l2 = np.radians(np.asarray(lon, dtype=float))
    dl = l2 - l1
    a = np.sin((p2 - p1) / 2.0) ** 2 + math.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    c = 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    # initial bearing from north, clockwise
    theta = np.arctan2(
        np.sin(dl) * np.cos(p2),
        math.cos(p1) * np.sin(p2) - math.sin(p1) * np.cos(p2) * np.cos(dl),
    )
    d = EARTH_RADIUS_KM * c
    return d * np.sin(theta), d * np.cos(theta)


def unproject_tangent(center_lat, center_lon, x, y):
    """Inverse of :func:`project_tangent`; returns (lat, lon) degrees."""
    p1 = math.radians(center_lat)
    l1 = math.radians(center_lon)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.hypot(x, y)
    c = d / EARTH_RADIUS_KM
    theta = np.arctan2(x, y)  # bearing from north
    p2 = np.arcsin(
        np.clip(math.sin(p1) * np.cos(c) + math.cos(p1) * np.sin(c) * np.cos(theta), -1.0, 1.0)
    )
    l2 = l1 + np.arctan2(
        np.sin(theta) * np.sin(c) * math.cos(p1),
        np.cos(c) - math.sin(p1) * np.sin(p2),
    )
    return np.degrees(p2), np.degrees(l2)


def geodetic_to_ecef_km(lat, lon, altitude_km=0.0):
    """Spherical-earth ECEF coordinates in km; shape (..., 3)."""
    p = np.radians(np.asarray(lat, dtype=float))
    l = np.radians(np.asarray(lon, dtype=float))
    r = EARTH_RADIUS_KM + altitude_km
    return np.stack(
        [r * np.cos(p) * np.cos(l), r * np.cos(p) * np.sin(l), r * np.sin(p)], axis=-1
    )


def satellite_ecef_km(longitude_deg):
    """ECEF position of the GEO satellite at the given longitude, zero latitude."""
    return geodetic_to_ecef_km(0.0, longitude_deg, GEO_ALTITUDE_KM)


def polygon_area_km2(lats, lons):
    """Geodesic area of a closed lat/lon ring on the spherical earth.

    Uses the classic spherical shoelace sum over edges; exact enough for
    beam-sized polygons (error well below the 1% validation tolerance).
    """
    lat = np.radians(np.asarray(lats, dtype=float))
    lon = np.radians(np.asarray(lons, dtype=float))
    lat2 = np.roll(lat, -1)
    lon2 = np.roll(lon, -1)
    total = np.sum((lon2 - lon) * (2.0 + np.sin(lat) + np.sin(lat2)))
    return abs(total) * EARTH_RADIUS_KM**2 / 2.0


# ---------------------------------------------------------------------------
# Planar polygon machinery (tangent-plane coordinates, km)
# ---------------------------------------------------------------------------

def point_in_polygon(boundary_xy, x, y):
    """Even-odd crossing test, vectorized over points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    v = np.asarray(boundary_xy, dtype=float)
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        crosses = (y1 <= y) != (y2 <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
        inside ^= crosses & (x < xi)
    return inside


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(p, q, r, s):
    """True if segment pq properly intersects rs (shared endpoints excluded)."""
    d1 = _orient(*r, *s, *p)
    d2 = _orient(*r, *s, *q)
    d3 = _orient(*p, *q, *r)
    d4 = _orient(*p, *q, *s)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def polygon_is_simple(boundary_xy):
    """Check that no two non-adjacent edges intersect."""
    v = np.asarray(boundary_xy, dtype=float)
    n = len(v)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                return False
    return True


def ray_boundary_distance(boundary_xy, phi):
    """Distance from the origin to the polygon boundary along azimuth phi.

    The boundary is traversed as straight segments; if the ray crosses the
    boundary more than once (non-star-shaped polygon) the nearest crossing
    is returned and a diagnostic warning is emitted.
    """
    v = np.asarray(boundary_xy, dtype=float)
    p = v
    q = np.roll(v, -1, axis=0)
    e = q - p
    ux, uy = math.cos(phi), math.sin(phi)
    denom = ux * e[:, 1] - uy * e[:, 0]          # cross(u, edge)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (p[:, 0] * e[:, 1] - p[:, 1] * e[:, 0]) / denom   # cross(p, edge)/cross(u, edge)
        s = (p[:, 0] * uy - p[:, 1] * ux) / denom             # cross(p, u)/cross(u, edge)
    eps = 1e-12
    ok = (np.abs(denom) > eps) & (s >= -1e-9) & (s <= 1.0 + 1e-9) & (t > eps)
    hits = t[ok]
    if hits.size == 0:
        raise GeometryError(f"ray at phi={phi:.6f} rad does not meet the beam boundary")
    hits = np.sort(hits)
    distinct = hits[np.concatenate(([True], np.diff(hits) > 1e-9 * hits[-1]))]
    if distinct.size > 1:
        warnings.warn(
            f"beam boundary is not star-shaped at phi={phi:.4f} rad "
            f"({distinct.size} crossings); using the nearest",
            stacklevel=2,
        )
    return float(distinct[0])


def edge_radius(beam: "Beam", phi: float) -> float:
    """Beam-center-to-boundary distance (km) along azimuth phi."""
    return ray_boundary_distance(beam.boundary_xy, phi % TAU)


def min_edge_radius(boundary_xy) -> float:
    """Minimum distance from the origin to the polygon boundary (km)."""
    v = np.asarray(boundary_xy, dtype=float)
    p = v
    q = np.roll(v, -1, axis=0)
    e = q - p
    ee = np.einsum("ij,ij->i", e, e)
    t = np.clip(-np.einsum("ij,ij->i", p, e) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    nearest = p + t[:, None] * e
    return float(np.min(np.hypot(nearest[:, 0], nearest[:, 1])))


def edge_midpoints_xy(boundary_xy):
    v = np.asarray(boundary_xy, dtype=float)
    return (v + np.roll(v, -1, axis=0)) / 2.0


# ---------------------------------------------------------------------------
# Normalized polar coordinates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizedPolar:
    """Angle (rad, CCW from local east, [0, 2pi)) and normalized radius in [0, 1]."""

    phi: float
    radius: float


def normalized_polar_from_xy(boundary_xy, x, y, clamp=False):
    """Normalized polar coordinates of a tangent-plane point.

    ``clamp`` maps points marginally outside the boundary back onto it
    (used for cluster barycentres of concave beams); without it, points
    beyond the boundary raise ValidationError.
    """
    r = math.hypot(x, y)
    if r == 0.0:
        return NormalizedPolar(0.0, 0.0)
    phi = math.atan2(y, x) % TAU
    r_edge = ray_boundary_distance(boundary_xy, phi)
    rnorm = r / r_edge
    if rnorm > 1.0 + 1e-9 and not clamp:
        raise ValidationError(
            f"point at phi={phi:.4f}, r={r:.3f} km lies outside the beam boundary "
            f"(edge at {r_edge:.3f} km)"
        )
    return NormalizedPolar(phi, min(rnorm, 1.0))


def to_normalized_polar(beam: "Beam", lat: float, lon: float) -> NormalizedPolar:
    """Normalized polar coordinates of a geodetic point within a beam."""
    x, y = project_tangent(beam.center_lat, beam.center_lon, lat, lon)
    return normalized_polar_from_xy(beam.boundary_xy, float(x), float(y))


# ---------------------------------------------------------------------------
# Scheduling sectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorGrid:
    """Ring/wedge decomposition of the unit disc in normalized polar coordinates.

    ``radii`` is the full ascending list (r_BC, r_1, ..., 1.0); ``angles`` the
    ascending wedge boundaries ending at 2pi (the lower bound 0 is implicit).
    Sector 0 is the beam-center disc; sector (k-1)*n_wedges + m covers
    ring k (radii (r_{k-1}, r_k]) and wedge m (angles (phi_{m-1}, phi_m]).
    """

    radii: tuple
    angles: tuple

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        a = np.asarray(self.angles, dtype=float)
        if len(r) < 2 or np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValidationError("sector_radii must be strictly ascending and positive")
        if abs(r[-1] - 1.0) > 1e-12:
            raise ValidationError("sector_radii must end at exactly 1.0")
        if len(a) < 1 or np.any(np.diff(a) <= 0) or a[0] <= 0:
            raise ValidationError("sector_angles must be strictly ascending in (0, 2pi]")
        if abs(a[-1] - TAU) > 1e-9:
            raise ValidationError("sector_angles must end at exactly 2pi")

    @property
    def r_bc(self) -> float:
        return self.radii[0]

    @property
    def n_rings(self) -> int:
        return len(self.radii) - 1

    @property
    def n_wedges(self) -> int:
        return len(self.angles)

    @property
    def n_sectors(self) -> int:
        return self.n_rings * self.n_wedges + 1

    def assign(self, p: NormalizedPolar) -> int:
        """Sector index of a normalized-polar point (0 = beam center)."""
        if p.radius <= self.r_bc:
            return BEAM_CENTER_SECTOR
        ring = int(np.searchsorted(self.radii, p.radius, side="left"))
        phi = p.phi % TAU
        if phi == 0.0:
            phi = TAU  # upper-closed wedge intervals make the cover total
        wedge = int(np.searchsorted(self.angles, phi, side="left")) + 1
        return (ring - 1) * self.n_wedges + wedge

    def ring_wedge(self, sector: int):
        """(ring, wedge) of a non-center sector, both 1-based."""
        if sector == BEAM_CENTER_SECTOR:
            raise ValueError("beam-center sector has no ring/wedge decomposition")
        ring = (sector - 1) // self.n_wedges + 1
        wedge = (sector - 1) % self.n_wedges + 1
        return ring, wedge

    def neighbor_order(self, sector: int):
        """All other sectors sorted by (ring distance, circular wedge distance).

        Used to pick where an empty (beam, sector) pool borrows clusters from.
        """
        def key(other):
            if other == sector:
                return (np.inf, np.inf, other)
            if sector == BEAM_CENTER_SECTOR:
                ring_o, _ = self.ring_wedge(other)
                return (ring_o, 0, other)
            ring_s, wedge_s = self.ring_wedge(sector)
            if other == BEAM_CENTER_SECTOR:
                return (ring_s, 0, other)
            ring_o, wedge_o = self.ring_wedge(other)
            dw = abs(wedge_o - wedge_s)
            dw = min(dw, self.n_wedges - dw)
            return (abs(ring_o - ring_s), dw, other)

        return sorted((q for q in range(self.n_sectors) if q != sector), key=key)


@dataclass
class Sectorisation:
    """Per-beam sector membership: ``members[q]`` lists the cluster indices
    whose barycentre falls in sector q of this beam."""

    beam_id: int
    grid: SectorGrid
    members: list


def assign_sector(sectorisation, p: NormalizedPolar) -> int:
    """Sector index for a point; accepts a SectorGrid or a Sectorisation."""
    grid = sectorisation.grid if isinstance(sectorisation, Sectorisation) else sectorisation
    return grid.assign(p)


def sectorise(grid: SectorGrid, beam_id: int, polars) -> Sectorisation:
    """Group items (e.g. cluster barycentres) into sector member lists."""
    members = [[] for _ in range(grid.n_sectors)]
    for idx, p in enumerate(polars):
        members[grid.assign(p)].append(idx)
    return Sectorisation(beam_id, grid, [np.asarray(m, dtype=int) for m in members])
