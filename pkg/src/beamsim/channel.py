"""Forward-link channel synthesis.

Each user sees one complex coefficient per transmitting antenna,

    h_bj = sqrt(G_R * G_loss * G_bj) / (4 pi (d / lambda) sqrt(P_Z))
           * exp(-j 2 pi d / lambda) * exp(-j theta),

with the receiver noise power P_Z = k T B folded in so downstream SINRs use
unit noise.  G_bj is the multi-beam transmit gain toward the user, modelled
with a tapered-aperture Bessel pattern (or a Gaussian main lobe for tests);
theta is a random phase drawn once per Monte Carlo iteration, by default one
phase per transmitting antenna.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j1, jv

from . import geometry
from .errors import ValidationError

GAIN_FLOOR_REL = 1e-10  # -100 dB relative to boresight; keeps |h| > 0


# ---------------------------------------------------------------------------
# Antenna pattern
# ---------------------------------------------------------------------------

def bessel_taper_gain(theta, theta_3db, g_max):
    """Tapered-aperture pattern G(theta) = G_max [J1(u)/2u + 36 J3(u)/u^3]^2.

    u = 2.07123 sin(theta)/sin(theta_3db) puts the half-power point at
    theta_3db; the bracket tends to 1/4 + 36/48 = 1 at boresight.
    """
    theta = np.asarray(theta, dtype=float)
    u = 2.07123 * np.sin(theta) / math.sin(theta_3db)
    small = np.abs(u) < 1e-8
    us = np.where(small, 1.0, u)
    bracket = np.where(small, 1.0, j1(us) / (2.0 * us) + 36.0 * jv(3, us) / us**3)
    rel = bracket**2
    rel = np.where(theta >= math.pi / 2.0, GAIN_FLOOR_REL, rel)
    return g_max * np.maximum(rel, GAIN_FLOOR_REL)


def gaussian_gain(theta, theta_3db, g_max):
    """Gaussian main lobe with the same half-power angle; no sidelobes."""
    theta = np.asarray(theta, dtype=float)
    rel = np.exp(-math.log(2.0) * (theta / theta_3db) ** 2)
    rel = np.where(theta >= math.pi / 2.0, GAIN_FLOOR_REL, rel)
    return g_max * np.maximum(rel, GAIN_FLOOR_REL)


def antenna_gain(theta, theta_3db, g_max, pattern="bessel"):
    """Linear transmit gain at off-axis angle theta (radians)."""
    if pattern == "bessel":
        return bessel_taper_gain(theta, theta_3db, g_max)
    if pattern == "gaussian":
        return gaussian_gain(theta, theta_3db, g_max)
    raise ValidationError(f"unknown antenna pattern {pattern!r}")


# ---------------------------------------------------------------------------
# Per-beam RF parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamRf:
    """Satellite-side antenna parameters per beam."""

    boresights: np.ndarray   # (N_B, 3) unit vectors satellite -> beam center
    theta_3db: np.ndarray    # (N_B,) radians
    g_max: np.ndarray        # (N_B,) linear


def beam_rf_parameters(beams, satellite_ecef_km, tx_aperture_efficiency=0.65) -> BeamRf:
    """Derive boresight directions, half-power angles, and peak gains.

    Unless a beam overrides them, theta_3db is the mean satellite-subtended
    angle of the boundary edge midpoints (the crossover points of a hexagonal
    tiling, putting adjacent-beam crossover near -3 dB) and the peak gain
    follows the aperture rule G_max = eta (70 pi / theta_3dB_deg)^2.
    """
    sat = np.asarray(satellite_ecef_km, dtype=float)
    bores = []
    theta3 = []
    gmax = []
    for beam in beams:
        center = geometry.geodetic_to_ecef_km(beam.center_lat, beam.center_lon)
        bore = center - sat
        bore = bore / np.linalg.norm(bore)
        bores.append(bore)
        if beam.theta_3db_deg is not None:
            t3 = math.radians(beam.theta_3db_deg)
        else:
            mids = geometry.edge_midpoints_xy(beam.boundary_xy)
            lat, lon = geometry.unproject_tangent(
                beam.center_lat, beam.center_lon, mids[:, 0], mids[:, 1]
            )
            pts = geometry.geodetic_to_ecef_km(lat, lon) - sat
            pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
            t3 = float(np.mean(np.arccos(np.clip(pts @ bore, -1.0, 1.0))))
        theta3.append(t3)
        if beam.g_max_db is not None:
            gmax.append(10.0 ** (beam.g_max_db / 10.0))
        else:
            gmax.append(tx_aperture_efficiency * (70.0 * math.pi / math.degrees(t3)) ** 2)
    return BeamRf(np.asarray(bores), np.asarray(theta3), np.asarray(gmax))


# ---------------------------------------------------------------------------
# Channel coefficients
# ---------------------------------------------------------------------------

def draw_phases(n_beams, rng):
    """One U[0, 2pi) phase per transmitting antenna, fixed for an iteration."""
    return rng.uniform(0.0, 2.0 * math.pi, size=n_beams)


def channel_matrix(user_lat, user_lon, slant_m, user_beam_idx, rf: BeamRf,
                   satellite_ecef_km, cfg, phases) -> np.ndarray:
    """(n_users, N_B) complex channel matrix for fixed users.

    `user_beam_idx` holds each user's serving-beam index (0-based) and is only
    consulted in the literal per-beam phase mode.
    """
    if not (cfg.rx_gain_linear > 0 and cfg.loss_linear > 0 and cfg.noise_power_w > 0):
        raise ValidationError("receive gain, losses, and noise power must be positive")
    sat = np.asarray(satellite_ecef_km, dtype=float)
    lam = cfg.wavelength
    d = np.asarray(slant_m, dtype=float)
    users = geometry.geodetic_to_ecef_km(user_lat, user_lon) - sat
    users = users / np.linalg.norm(users, axis=-1, keepdims=True)
    cos_off = np.clip(users @ rf.boresights.T, -1.0, 1.0)
    theta = np.arccos(cos_off)                                  # (n, N_B)
    gains = np.empty_like(theta)
    for j in range(rf.boresights.shape[0]):
        gains[:, j] = antenna_gain(theta[:, j], rf.theta_3db[j], rf.g_max[j],
                                   cfg.antenna_pattern)
    amp = (
        np.sqrt(cfg.rx_gain_linear * cfg.loss_linear * gains)
        * lam
        / (4.0 * math.pi * d[:, None] * math.sqrt(cfg.noise_power_w))
    )
    h = amp * np.exp(-1j * (2.0 * math.pi / lam) * d)[:, None]
    phases = np.asarray(phases, dtype=float)
    if cfg.phase_mode == "per-antenna":
        h = h * np.exp(-1j * phases)[None, :]
    else:  # literal per-receiving-beam reading
        h = h * np.exp(-1j * phases[np.asarray(user_beam_idx, dtype=int)])[:, None]
    return h


def channel_coefficient(user, antenna_j, rf: BeamRf, satellite_ecef_km, cfg, phases) -> complex:
    """Single coefficient between one user terminal and antenna feed j."""
    row = channel_matrix(
        np.array([user.lat]),
        np.array([user.lon]),
        np.array([user.slant_range_m]),
        np.array([0]),
        rf,
        satellite_ecef_km,
        cfg,
        phases,
    )[0]
    return complex(row[antenna_j])


def equivalent_cluster_vector(member_vectors) -> np.ndarray:
    """Element-wise arithmetic mean of the cluster members' channel vectors."""
    m = np.asarray(member_vectors)
    if m.ndim == 1:
        m = m[None, :]
    if m.size == 0:
        raise ValidationError("cannot average an empty cluster")
    return m.mean(axis=0)


def assemble_frame_matrix(selected_vectors) -> np.ndarray:
    """Stack one equivalent channel vector per beam into the frame matrix."""
    rows = [np.asarray(v) for v in selected_vectors]
    n = len(rows)
    if n == 0:
        raise ValidationError("frame matrix needs at least one beam")
    for b, row in enumerate(rows):
        if row.shape != (n,):
            raise ValidationError(
                f"beam {b}: equivalent vector has shape {row.shape}, expected ({n},)"
            )
    h = np.vstack(rows)
    if not np.all(np.isfinite(h.view(float))):
        raise ValidationError("frame matrix contains non-finite entries")
    return h
