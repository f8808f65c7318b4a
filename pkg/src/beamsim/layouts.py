"""Synthetic hexagonal beam layouts.

The bundled layouts are hexagonal tilings generated here: beam centers on a
triangular lattice (spacing sqrt(3) * radius), each beam bounded by the
hexagon of the given circumradius around its center.  Centers and vertices
are laid out in the tangent plane of the layout origin and mapped back to
latitude/longitude, so distant beams pick up a mild, realistic distortion.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry


def hex_centers(n_rings: int):
    """Centers of a hexagonal tiling out to `n_rings` rings, unit spacing."""
    a1 = (math.cos(math.pi / 6.0), math.sin(math.pi / 6.0))  # lattice basis at 30 deg
    a2 = (0.0, 1.0)                                          # and at 90 deg
    pts = [(0.0, 0.0)]
    for i in range(-n_rings, n_rings + 1):
        for j in range(-n_rings, n_rings + 1):
            if (i, j) == (0, 0) or max(abs(i), abs(j), abs(i + j)) > n_rings:
                continue
            pts.append((i * a1[0] + j * a2[0], i * a1[1] + j * a2[1]))
    return pts


def make_hex_layout(n_beams: int, center_lat: float, center_lon: float, radius_km: float = 250.0):
    """Beam-layout records for an `n_beams` hexagonal tiling.

    Rings are grown until they hold at least `n_beams` centers; the layout
    keeps the `n_beams` centers closest to the origin (ties broken by angle),
    so counts that are not 1+3k(k+1) trim the outermost ring.
    """
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    spacing = math.sqrt(3.0) * radius_km
    rings = 0
    while 1 + 3 * rings * (rings + 1) < n_beams:
        rings += 1
    centers = np.asarray(hex_centers(rings), dtype=float) * spacing
    dist = np.hypot(centers[:, 0], centers[:, 1])
    ang = np.mod(np.arctan2(centers[:, 1], centers[:, 0]), 2.0 * math.pi)
    order = np.lexsort((ang, np.round(dist, 6)))
    centers = centers[order][:n_beams]

    vertex_angles = np.radians(np.arange(0, 360, 60, dtype=float))
    records = []
    for idx, (cx, cy) in enumerate(centers, start=1):
        lat_c, lon_c = geometry.unproject_tangent(center_lat, center_lon, cx, cy)
        vx = cx + radius_km * np.cos(vertex_angles)
        vy = cy + radius_km * np.sin(vertex_angles)
        lat_v, lon_v = geometry.unproject_tangent(center_lat, center_lon, vx, vy)
        records.append(
            {
                "id": idx,
                "center": [float(lat_c), float(lon_c)],
                "boundary": [[float(a), float(b)] for a, b in zip(lat_v, lon_v)],
            }
        )
    return records
