"""Detect the 3D points occluding each facade.

A point occludes a facade when it sits in the band between the facade plane
and the trajectory (street side), within the facade's planimetric extent,
and above the ground-return rejection level. Detections below the count
threshold are dropped wholesale: a handful of band points is noise, not an
occluder. Each measured point can optionally be densified into a 9-point
cube to thicken the projected masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PipelineConfig
from .geometry import FacadeQuad, Segment2, segment_frame_coords, signed_plane_distance

__all__ = ["OccluderSet", "band_membership", "detect_occluding_points", "cube_dilate"]


@dataclass
class OccluderSet:
    """Occluding points for one facade.

    `synthetic` flags cube-dilation corners (never present unless dilation
    ran); `point_indices` keeps the dataset index of each measured point
    (-1 for synthetic ones) so detections can be joined against labels.
    """

    segment_id: int
    points: np.ndarray  # (M, 3) world meters
    synthetic: np.ndarray  # (M,) bool, False = measured
    point_indices: np.ndarray  # (M,) int64, -1 for synthetic points

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def measured_points(self) -> np.ndarray:
        return self.points[~self.synthetic]

    @staticmethod
    def empty(segment_id: int) -> "OccluderSet":
        return OccluderSet(
            segment_id,
            np.empty((0, 3)),
            np.empty(0, dtype=bool),
            np.empty(0, dtype=np.int64),
        )


def band_membership(points, quad: FacadeQuad, cfg: PipelineConfig) -> np.ndarray:
    """Boolean mask of the points inside the facade's occluder band.

    The band is: signed plane distance in [occ_d_min, occ_d_max] (street
    side only, excluding wall relief), planimetric footprint within the quad
    extent widened by occ_extent_margin, and altitude in
    (z_bottom + occ_ground_eps, z_top].
    """
    pts = np.asarray(points, dtype=np.float64)
    d = signed_plane_distance(quad.plane, pts)
    seg = Segment2(-1, quad.e1, quad.e2)
    s, _ = segment_frame_coords(seg, pts)
    z = pts[:, 2]
    return (
        (d >= cfg.occ_d_min)
        & (d <= cfg.occ_d_max)
        & (s >= -cfg.occ_extent_margin)
        & (s <= quad.length + cfg.occ_extent_margin)
        & (z > quad.z_bottom + cfg.occ_ground_eps)
        & (z <= quad.z_top)
    )


def detect_occluding_points(
    points,
    quad: FacadeQuad,
    cfg: PipelineConfig,
    segment_id: int | None = None,
) -> OccluderSet:
    """All-or-nothing extraction of the band points in front of the quad.

    Returns an empty set when fewer than occ_min_pts points qualify; an
    empty set is the valid "no occluders" answer.
    """
    pts = np.asarray(points, dtype=np.float64)
    sid = -1 if segment_id is None else int(segment_id)
    keep = np.flatnonzero(band_membership(pts, quad, cfg))
    if keep.size < cfg.occ_min_pts:
        return OccluderSet.empty(sid)
    return OccluderSet(
        segment_id=sid,
        points=pts[keep],
        synthetic=np.zeros(keep.size, dtype=bool),
        point_indices=keep.astype(np.int64),
    )


# corner offsets of the dilation cube, unit half-edge
_CUBE_CORNERS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


def cube_dilate(occ: OccluderSet, h: float) -> OccluderSet:
    """Replace each measured point with itself plus its 8 cube corners.

    The corners (at +-h on each axis) are flagged synthetic; the output has
    exactly 9x the input count and each 9-point group keeps its centroid at
    the original point.
    """
    if h <= 0:
        raise ValueError(f"cube half-edge must be > 0, got {h}")
    if occ.synthetic.any():
        raise ValueError("cube_dilate expects a measured-only occluder set")
    if occ.count == 0:
        return OccluderSet.empty(occ.segment_id)
    groups = occ.points[:, None, :] + np.concatenate(
        [np.zeros((1, 3)), h * _CUBE_CORNERS]
    )[None, :, :]  # (M, 9, 3)
    synthetic = np.tile(np.array([False] + [True] * 8), occ.count)
    indices = np.repeat(occ.point_indices, 9)
    indices[synthetic] = -1
    return OccluderSet(
        segment_id=occ.segment_id,
        points=groups.reshape(-1, 3),
        synthetic=synthetic,
        point_indices=indices,
    )
