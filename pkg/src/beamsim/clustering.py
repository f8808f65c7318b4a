"""Fixed-size user clustering (MaxDist).

Each pass picks the not-yet-clustered user farthest from the barycentre of
the remaining users as reference, then groups it with its K-1 nearest
remaining neighbours.  The similarity space is either the 2-D tangent-plane
position or the real embedding of the complex channel vector.  Ties (equal
distances) break toward the lowest user index so partitions are
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass
class ClusterPartition:
    """Partition of one beam's users into clusters of (at most) K members."""

    beam_id: int
    clusters: list          # list of np.ndarray of local user indices
    n_users: int

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def validate(self):
        seen = np.concatenate(self.clusters) if self.clusters else np.array([], dtype=int)
        if len(seen) != self.n_users or len(np.unique(seen)) != self.n_users:
            raise ValidationError(
                f"beam {self.beam_id}: clusters do not partition the {self.n_users} users"
            )
        return self


def channel_features(channel_vectors) -> np.ndarray:
    """Real feature embedding of complex channel vectors: [Re, Im] concatenated.

    Euclidean distance in the embedding equals the complex Euclidean distance.
    """
    h = np.asarray(channel_vectors)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    feats = np.hstack([h.real, h.imag])
    return feats[0] if single else feats


def max_dist_partition(features, cluster_size: int, beam_id: int = 0) -> ClusterPartition:
    """Partition users into ceil(N/K) clusters with the MaxDist procedure."""
    feats = np.asarray(features, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    n = len(feats)
    if n == 0:
        raise ValidationError(f"beam {beam_id}: cannot cluster an empty user set")
    k = int(cluster_size)
    if k < 1:
        raise ValidationError("cluster size must be >= 1")

    remaining = np.arange(n)            # kept ascending: argmin/argmax tie-break
    clusters = []
    while remaining.size:
        pool = feats[remaining]
        barycentre = pool.mean(axis=0)
        ref_pos = int(np.argmax(np.einsum("ij,ij->i", pool - barycentre, pool - barycentre)))
        dist = np.einsum("ij,ij->i", pool - pool[ref_pos], pool - pool[ref_pos])
        dist[ref_pos] = -1.0            # reference always first
        order = np.argsort(dist, kind="stable")
        take = order[: min(k, remaining.size)]
        clusters.append(np.sort(remaining[take]))
        keep = np.ones(remaining.size, dtype=bool)
        keep[take] = False
        remaining = remaining[keep]

    assert len(clusters) == math.ceil(n / k)
    return ClusterPartition(beam_id, clusters, n).validate()


def cluster_barycentres(xy, partition: ClusterPartition) -> np.ndarray:
    """Position centroid of every cluster; (N_K, 2) in tangent-plane km."""
    pts = np.asarray(xy, dtype=float)
    return np.vstack([pts[c].mean(axis=0) for c in partition.clusters])
