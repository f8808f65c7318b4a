"""ModCod mapping and metric aggregation.

A cluster decodes at the spectral efficiency its weakest member supports:
the minimum member SINR selects the highest ModCod threshold it still
clears (0 below the table = outage).  Aggregation pools rates over frames,
beams, and Monte Carlo iterations into the average spectral efficiency,
the GSA-minus-random gain, and the precoding-loss frame fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .scenario import ModCodTable


def cluster_rate(member_sinrs_linear, modcod: ModCodTable) -> float:
    """Spectral efficiency of one scheduled cluster (bit/s/Hz)."""
    g = np.asarray(member_sinrs_linear, dtype=float)
    if g.size == 0:
        raise ValidationError("cluster rate needs at least one member SINR")
    worst = float(np.min(g))
    if worst <= 0.0:
        return 0.0
    return float(modcod.efficiency(10.0 * math.log10(worst)))


@dataclass
class UserSinrMap:
    """Average per-user SINR over the frames in which the user was scheduled."""

    beam_ids: np.ndarray
    user_ids: np.ndarray
    lat: np.ndarray
    lon: np.ndarray
    mean_precoded_db: np.ndarray
    mean_nonprecoded_db: np.ndarray
    frames_served: np.ndarray


@dataclass
class PolicyAggregate:
    """Pooled and per-iteration metrics for one scheduling policy."""

    eta_bar: float
    loss_frame_fraction: float
    n_frames: int
    n_iterations: int
    per_iteration_eta: np.ndarray
    per_iteration_loss_fraction: np.ndarray
    per_iteration_frames: np.ndarray


@dataclass
class MetricsReport:
    """Metrics of one (cluster size, density) cell, possibly for both policies."""

    cluster_size: int
    density: float
    policies: dict = field(default_factory=dict)     # policy -> PolicyAggregate
    user_maps: dict = field(default_factory=dict)    # policy -> UserSinrMap

    @property
    def gain(self) -> float | None:
        """GSA-minus-random gain in average spectral efficiency."""
        if "gsa" in self.policies and "random" in self.policies:
            return self.policies["gsa"].eta_bar - self.policies["random"].eta_bar
        return None


def aggregate_policy(per_iteration_rates, per_iteration_loss_flags) -> PolicyAggregate:
    """Pool per-iteration frame/beam rate arrays into one policy's metrics.

    `per_iteration_rates[i]` is the (n_frames_i, N_B) rate array of iteration
    i and `per_iteration_loss_flags[i]` the matching per-frame loss flags.
    """
    if not per_iteration_rates:
        raise ValidationError("aggregation needs at least one iteration")
    etas = np.array([float(np.mean(r)) for r in per_iteration_rates])
    frames = np.array([len(r) for r in per_iteration_rates])
    losses = np.array([float(np.mean(f)) if len(f) else 0.0 for f in per_iteration_loss_flags])
    total_rate = sum(float(np.sum(r)) for r in per_iteration_rates)
    total_cells = sum(r.size for r in per_iteration_rates)
    total_loss = sum(int(np.sum(f)) for f in per_iteration_loss_flags)
    total_frames = int(frames.sum())
    return PolicyAggregate(
        eta_bar=total_rate / total_cells,
        loss_frame_fraction=total_loss / total_frames,
        n_frames=total_frames,
        n_iterations=len(per_iteration_rates),
        per_iteration_eta=etas,
        per_iteration_loss_fraction=losses,
        per_iteration_frames=frames,
    )


def aggregate(cluster_size, density, rates_by_policy, loss_by_policy,
              user_maps=None) -> MetricsReport:
    """Build the cell-level metrics report from per-policy iteration outputs."""
    report = MetricsReport(int(cluster_size), float(density))
    for policy, rates in rates_by_policy.items():
        report.policies[policy] = aggregate_policy(rates, loss_by_policy[policy])
    if user_maps:
        report.user_maps.update(user_maps)
    return report
