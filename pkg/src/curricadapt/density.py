"""Density-ranked tiering of pseudo-labeled samples.

Per category the pipeline is: squared-Euclidean pairwise matrix E, cutoff
e_c at the k% rank of the sorted off-diagonal entries, local density
rho_i = #{j != i : E_ij < e_c}, the densest sample as cluster center, and
a clustering of the plain Euclidean distances to that center into P tiers
(0 = easy ... P-1 = hard). Tier unions across categories give the staged
training subsets.

The 1-D clustering is solved exactly: optimal clusters of scalars are
contiguous in sorted order, so a dynamic program over runs of distinct
values finds the global within-cluster SSE minimum deterministically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def pairwise_sq_dist(features: np.ndarray) -> np.ndarray:
    """Matrix of squared Euclidean distances, symmetric with zero diagonal."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"expected a 2-D feature array, got shape {f.shape}")
    diff = f[:, None, :] - f[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cutoff_ec(e: np.ndarray, k_percent: float) -> float:
    """Distance cutoff at the k% rank of the sorted pair distances.

    Sorts the n(n-1)/2 strict upper-triangle entries ascending and returns
    the value at 1-based rank ceil(k/100 * count). Needs >= 2 samples.
    """
    if not 0.0 < k_percent < 100.0:
        raise ValueError("k_percent must lie in (0, 100)")
    n = e.shape[0]
    if n < 2:
        raise ValueError("cutoff needs a category with at least 2 samples")
    pairs = np.sort(e[np.triu_indices(n, k=1)])
    rank = math.ceil(k_percent / 100.0 * pairs.size)
    return float(pairs[rank - 1])


def local_density(e: np.ndarray, e_c: float) -> np.ndarray:
    """rho_i = number of other samples strictly closer than e_c."""
    below = e < e_c
    np.fill_diagonal(below, False)
    return below.sum(axis=1)


def kmeans_1d(values: np.ndarray, clusters: int) -> np.ndarray:
    """Globally optimal 1-D k-means assignment.

    Equal values always share a cluster, so the search runs over runs of
    distinct values; clusters are contiguous in sorted order and the
    dynamic program minimises total within-cluster SSE exactly. Returns a
    label per input value with clusters numbered by ascending mean; at
    most min(clusters, #distinct) labels are used.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    if clusters < 1:
        raise ValueError("cluster count must be >= 1")
    if n == 0:
        return np.zeros(0, dtype=int)
    distinct, inverse = np.unique(v, return_inverse=True)
    m = distinct.size
    k = min(clusters, m)

    # prefix sums over the weighted distinct values for O(1) segment SSE
    counts = np.bincount(inverse, minlength=m).astype(np.float64)
    csum = np.concatenate([[0.0], np.cumsum(counts)])
    vsum = np.concatenate([[0.0], np.cumsum(counts * distinct)])
    v2sum = np.concatenate([[0.0], np.cumsum(counts * distinct * distinct)])

    def seg_sse(i: int, j: int) -> float:
        # SSE of distinct blocks i..j-1 around their weighted mean
        w = csum[j] - csum[i]
        s = vsum[j] - vsum[i]
        q = v2sum[j] - v2sum[i]
        return q - s * s / w

    # cost[c][j] = best SSE splitting blocks 0..j-1 into c+1 clusters
    cost = np.full((k, m + 1), np.inf)
    cut = np.zeros((k, m + 1), dtype=int)
    for j in range(1, m + 1):
        cost[0][j] = seg_sse(0, j)
    for c in range(1, k):
        for j in range(c + 1, m + 1):
            best, arg = np.inf, c
            for i in range(c, j):
                s = cost[c - 1][i] + seg_sse(i, j)
                if s < best:
                    best, arg = s, i
            cost[c][j] = best
            cut[c][j] = arg

    # walk the cut points back into a cluster id per distinct block
    block_label = np.zeros(m, dtype=int)
    j = m
    for c in range(k - 1, 0, -1):
        i = cut[c][j]
        block_label[i:j] = c
        j = i
    return block_label[inverse]


@dataclass
class DensityProfile:
    """Per-category density summary used to pick the cluster center."""

    category: int
    pair_cutoff: float
    densities: np.ndarray
    center_index: int
    k_percent: float


@dataclass
class SubsetAssignment:
    """Tier per sample plus per-category bookkeeping.

    tiers maps sample id -> tier index (0 easy, 1 moderate, 2 hard for the
    default P = 3). stats rows are (category, tier, member count, mean
    distance to the category center).
    """

    clusters: int
    k_percent: float
    tiers: dict = field(default_factory=dict)
    stats: list = field(default_factory=list)

    def tier_ids(self, tier: int) -> list:
        return [sid for sid, t in self.tiers.items() if t == tier]

    def to_dict(self) -> dict:
        return {
            "P": self.clusters,
            "k_percent": self.k_percent,
            "tiers": {str(k): int(v) for k, v in self.tiers.items()},
            "stats": [
                {
                    "category": int(c),
                    "tier": int(t),
                    "count": int(n),
                    "mean_distance": float(d),
                }
                for c, t, n, d in self.stats
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SubsetAssignment":
        a = cls(clusters=int(obj["P"]), k_percent=float(obj["k_percent"]))
        a.tiers = {k: int(v) for k, v in obj["tiers"].items()}
        a.stats = [
            (r["category"], r["tier"], r["count"], r["mean_distance"])
            for r in obj["stats"]
        ]
        return a

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SubsetAssignment":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def density_profile(features: np.ndarray, category: int, k_percent: float) -> DensityProfile:
    """Cutoff, densities and center for one category's feature rows."""
    e = pairwise_sq_dist(features)
    e_c = cutoff_ec(e, k_percent)
    rho = local_density(e, e_c)
    center = int(np.argmax(rho))  # ties break to the lowest index
    return DensityProfile(category, e_c, rho, center, k_percent)


def _center_distances(f: np.ndarray, k_percent: float) -> np.ndarray:
    """Plain Euclidean distance of every row to the densest row."""
    prof = density_profile(f, -1, k_percent)
    return np.sqrt(((f - f[prof.center_index]) ** 2).sum(axis=1))


def split_category(features: np.ndarray, clusters: int, k_percent: float) -> np.ndarray:
    """Tier label per sample of a single category.

    Degenerate categories (fewer samples than clusters, or a single
    sample) collapse to tier 0.
    """
    f = np.asarray(features, dtype=np.float64)
    n = f.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    if n == 1 or n < clusters:
        return np.zeros(n, dtype=int)
    return kmeans_1d(_center_distances(f, k_percent), clusters)


def build_curriculum(sample_ids, labels, features, clusters: int = 3,
                     k_percent: float = 40.0) -> SubsetAssignment:
    """Group samples by pseudo-label, tier each category, union the tiers.

    Every sample receives exactly one tier; categories without samples are
    skipped. Returns the assignment with per-category stats sorted by
    (category, tier).
    """
    ids = list(sample_ids)
    lab = np.asarray(labels, dtype=int)
    f = np.asarray(features, dtype=np.float64)
    if len(ids) != len(set(ids)):
        raise ValueError("sample ids must be unique")
    if lab.shape[0] != len(ids) or f.shape[0] != len(ids):
        raise ValueError("ids, labels and features must have equal length")
    if clusters < 1:
        raise ValueError("cluster count must be >= 1")

    out = SubsetAssignment(clusters=clusters, k_percent=k_percent)
    for cat in np.unique(lab):
        idx = np.flatnonzero(lab == cat)
        rows = f[idx]
        if rows.shape[0] == 1:
            tiers, dist = np.zeros(1, dtype=int), np.zeros(1)
        else:
            dist = _center_distances(rows, k_percent)
            if rows.shape[0] < clusters:
                tiers = np.zeros(rows.shape[0], dtype=int)
            else:
                tiers = kmeans_1d(dist, clusters)
        for local, tier in zip(idx, tiers):
            out.tiers[ids[local]] = int(tier)
        for tier in sorted(set(int(t) for t in tiers)):
            members = tiers == tier
            out.stats.append(
                (int(cat), tier, int(members.sum()), float(dist[members].mean()))
            )
    return out
