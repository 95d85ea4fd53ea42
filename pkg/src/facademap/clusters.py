"""Per-segment facade clusters: fuse hyper-points with the building map.

Each hyper-point lying in the search band of at least one map segment is
assigned to exactly one segment: the one with the smallest perpendicular
distance, ties to the smaller segment id. That makes the clusters disjoint
by construction. Clusters below the size threshold are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PipelineConfig
from .geometry import Segment2, segment_frame_coords

__all__ = ["FacadeCluster", "extract_facade_clusters"]


@dataclass(frozen=True)
class FacadeCluster:
    segment_id: int
    point_indices: np.ndarray  # ascending indices into the dataset point list

    def __post_init__(self):
        idx = np.asarray(self.point_indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "point_indices", idx)

    @property
    def count(self) -> int:
        return int(self.point_indices.shape[0])


def extract_facade_clusters(
    hyper_indices,
    points,
    cadastre: list[Segment2],
    cfg: PipelineConfig,
) -> list[FacadeCluster]:
    """Assign hyper-points to map segments and keep the big-enough clusters.

    Membership requires |t| <= neighborhood and s within the segment extent
    extended by occ_extent_margin at both ends. Output is sorted by
    segment_id; disjointness holds across all returned clusters.
    """
    if not cadastre:
        raise ValueError("cannot extract facade clusters from an empty cadastre")
    hyper_indices = np.asarray(hyper_indices, dtype=np.int64)
    pts = np.asarray(points, dtype=np.float64)
    xy = pts[hyper_indices, :2] if hyper_indices.size else np.empty((0, 2))

    best_t = np.full(xy.shape[0], np.inf)
    best_seg = np.full(xy.shape[0], -1, dtype=np.int64)
    # ascending-id scan with a strict '<' keeps the smaller id on ties
    for seg in sorted(cadastre, key=lambda s: s.id):
        s, t = segment_frame_coords(seg, xy)
        at = np.abs(t)
        inside = (
            (at <= cfg.neighborhood)
            & (s >= -cfg.occ_extent_margin)
            & (s <= seg.length + cfg.occ_extent_margin)
        )
        better = inside & (at < best_t)
        best_t[better] = at[better]
        best_seg[better] = seg.id

    clusters = []
    for seg in sorted(cadastre, key=lambda s: s.id):
        members = hyper_indices[best_seg == seg.id]
        if members.size >= cfg.min_cluster_pts:
            clusters.append(FacadeCluster(seg.id, np.sort(members)))
    return clusters
