"""Retroreflector isolation: intensity band-pass, DBSCAN, cluster checks."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyCluster, ValidationError
from .scene import LidarFrame


@dataclass(frozen=True)
class IntensityBand:
    lo: float = 230.0
    hi: float = 255.0

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 255.0:
            raise ValidationError("need 0 <= lo <= hi <= 255", field="band")


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.10
    min_pts: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValidationError("eps must be > 0", field="eps")
        if self.min_pts < 1:
            raise ValidationError("min_pts must be >= 1", field="min_pts")


@dataclass(frozen=True)
class IsolationParams:
    band: IntensityBand = IntensityBand()
    dbscan: DbscanParams = DbscanParams()
    max_extent: float = 0.25
    # Slightly wider than the scanner's 0.8-2.0 m retro window: a flat tape
    # whose center sits on the window edge has member ranges just beyond it.
    range_gate: tuple[float, float] = (0.7, 2.1)
    grid_index: bool = False


@dataclass(frozen=True)
class ClusterReport:
    id: int
    member_indices: tuple[int, ...]
    centroid: np.ndarray
    mean_range: float
    point_count: int
    extent: float
    valid: bool = True
    reject_reason: str | None = None  # "extent" or "out_of_range_gate"


@dataclass(frozen=True)
class Partition:
    clusters: list[list[int]]
    noise: list[int]


def intensity_gate(frame: LidarFrame, band: IntensityBand) -> np.ndarray:
    """Indices of returns with ``band.lo <= intensity <= band.hi``, in frame order."""
    i = frame.intensities
    return np.nonzero((i >= band.lo) & (i <= band.hi))[0]


def _neighbors_brute(points: np.ndarray, eps: float) -> list[np.ndarray]:
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    within = d2 <= eps * eps
    return [np.nonzero(row)[0] for row in within]


def _neighbors_grid(points: np.ndarray, eps: float) -> list[np.ndarray]:
    cells = np.floor(points / eps).astype(np.int64)
    buckets: dict[tuple, list[int]] = {}
    for i, c in enumerate(map(tuple, cells)):
        buckets.setdefault(c, []).append(i)
    offsets = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    eps2 = eps * eps
    out = []
    for i, (cx, cy, cz) in enumerate(map(tuple, cells)):
        cand = []
        for dx, dy, dz in offsets:
            cand.extend(buckets.get((cx + dx, cy + dy, cz + dz), ()))
        cand = np.array(sorted(cand), dtype=np.int64)
        d2 = np.sum((points[cand] - points[i]) ** 2, axis=1)
        out.append(cand[d2 <= eps2])
    return out


def dbscan(points, params: DbscanParams, grid_index: bool = False) -> Partition:
    """Density-based clustering with a deterministic border rule.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are the connected components of core points,
    numbered by their lowest core index. A border point joins the cluster of
    its lowest-index core neighbour. Member and noise lists are ascending.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return Partition([], [])
    neigh = (_neighbors_grid if grid_index else _neighbors_brute)(pts, params.eps)
    core = np.array([len(nb) >= params.min_pts for nb in neigh])

    label = np.full(n, -1, dtype=np.int64)
    n_clusters = 0
    for i in range(n):
        if not core[i] or label[i] >= 0:
            continue
        label[i] = n_clusters
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in neigh[j]:
                if core[k] and label[k] < 0:
                    label[k] = n_clusters
                    queue.append(k)
        n_clusters += 1

    for i in np.nonzero(~core)[0]:
        cores = [k for k in neigh[i] if core[k]]
        if cores:
            label[i] = label[min(cores)]

    clusters = [np.nonzero(label == c)[0].tolist() for c in range(n_clusters)]
    noise = np.nonzero(label < 0)[0].tolist()
    return Partition(clusters, noise)


def summarize_cluster(member_indices, frame: LidarFrame, cluster_id: int = 0) -> ClusterReport:
    """Centroid, mean range from the LiDAR origin, and max pairwise extent."""
    idx = np.asarray(member_indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyCluster("cluster has no members")
    pts = frame.positions[idx]
    centroid = pts.mean(axis=0)
    mean_range = float(np.mean(np.linalg.norm(pts, axis=1)))
    if len(pts) > 1:
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        extent = float(math.sqrt(d2.max()))
    else:
        extent = 0.0
    return ClusterReport(
        id=cluster_id,
        member_indices=tuple(int(i) for i in idx),
        centroid=centroid,
        mean_range=mean_range,
        point_count=len(idx),
        extent=extent,
    )


def validate_cluster(report: ClusterReport, max_extent: float, range_gate) -> ClusterReport:
    lo, hi = range_gate
    if report.extent > max_extent:
        return replace(report, valid=False, reject_reason="extent")
    if not lo <= report.mean_range <= hi:
        return replace(report, valid=False, reject_reason="out_of_range_gate")
    return replace(report, valid=True, reject_reason=None)


def detect(frame: LidarFrame, params: IsolationParams = IsolationParams()) -> list[ClusterReport]:
    """Gate, cluster and validate one frame. Reports are ordered by id."""
    gated = intensity_gate(frame, params.band)
    part = dbscan(frame.positions[gated], params.dbscan, grid_index=params.grid_index)
    reports = []
    for cid, members in enumerate(part.clusters):
        rep = summarize_cluster(gated[members], frame, cluster_id=cid)
        reports.append(validate_cluster(rep, params.max_extent, params.range_gate))
    return reports
