"""Per-image occlusion masks: rasterization, exact disc morphology, feathering.

Morphology uses exact integer-lattice disc structuring elements
D_r = {(dx, dy) in Z^2 : dx^2 + dy^2 <= r^2} and image borders clip (pixels
outside the frame count as unset). Instead of sliding the disc, dilation and
erosion threshold exact integer squared distances recovered from a euclidean
distance transform; the result is bit-identical to the sliding-window
definition but runs in near-linear time.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .dataset import PipelineConfig
from .geometry import PinholeCamera, project_points

__all__ = [
    "rasterize_points",
    "disc_dilate",
    "disc_erode",
    "feather_contours",
    "occlusion_masks",
]


def rasterize_points(cam: PinholeCamera, points) -> np.ndarray:
    """Project 3D points and set their nearest-integer pixels.

    Points behind the camera or with a continuous projection outside
    [0, width) x [0, height) are skipped. Rounding is half-up (ties toward
    +inf on both axes); the rounded pixel must itself be in frame.
    """
    mask = np.zeros((cam.height, cam.width), dtype=bool)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        return mask
    uv, valid = project_points(cam, pts)
    u, v = uv[:, 0], uv[:, 1]
    inframe = valid & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    cols = np.floor(u[inframe] + 0.5).astype(np.int64)
    rows = np.floor(v[inframe] + 0.5).astype(np.int64)
    ok = (cols < cam.width) & (rows < cam.height)
    mask[rows[ok], cols[ok]] = True
    return mask


def _sq_dist_to_unset(mask: np.ndarray) -> np.ndarray:
    """Exact integer squared distance from every pixel to the nearest unset
    pixel of `mask` (0 on unset pixels)."""
    ind = ndimage.distance_transform_edt(mask, return_distances=False, return_indices=True)
    ii, jj = np.indices(mask.shape)
    return (ii - ind[0]) ** 2 + (jj - ind[1]) ** 2


def disc_dilate(mask: np.ndarray, r: int) -> np.ndarray:
    """Set p iff some set input pixel lies within the disc D_r around p."""
    if r < 1:
        raise ValueError(f"dilation radius must be >= 1, got {r}")
    if not mask.any():
        return np.zeros_like(mask, dtype=bool)
    # distance to the nearest *set* pixel = distance to unset of the complement
    return _sq_dist_to_unset(~mask) <= r * r


def disc_erode(mask: np.ndarray, r: int) -> np.ndarray:
    """Set p iff the full disc D_r around p is set (borders count as unset)."""
    if r < 1:
        raise ValueError(f"erosion radius must be >= 1, got {r}")
    if not mask.any():
        return np.zeros_like(mask, dtype=bool)
    # pad with an unset ring: the nearest outside pixel is always in it
    padded = np.pad(mask, 1, constant_values=False)
    sq = _sq_dist_to_unset(padded)[1:-1, 1:-1]
    return sq > r * r


def feather_contours(mask: np.ndarray, w: int) -> np.ndarray:
    """Soft [0, 1] weights: 1 deep inside the mask, linear ramp of width w
    at the contours, 0 outside.

    The ramp value is (chessboard distance to the nearest unset pixel) / w,
    clamped at 1; distances are measured inside the frame only. With w = 0
    the result equals the hard mask.
    """
    if w < 0:
        raise ValueError(f"feather width must be >= 0, got {w}")
    hard = mask.astype(np.float32)
    if w == 0 or not mask.any():
        return hard
    if mask.all():
        return np.ones_like(hard)
    dist = ndimage.distance_transform_cdt(mask, metric="chessboard").astype(np.float32)
    return np.where(mask, np.minimum(dist / w, 1.0), np.float32(0.0))


def occlusion_masks(
    cam: PinholeCamera,
    occluder_points,
    cfg: PipelineConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Full mask chain for one view: rasterize, dilate, erode, feather.

    Returns (hard, soft). The hard mask is authoritative for exclusion; the
    soft mask only weights mosaic scores near contours.
    """
    seeded = rasterize_points(cam, occluder_points)
    if not seeded.any():
        return seeded, seeded.astype(np.float32)
    hard = disc_erode(disc_dilate(seeded, cfg.dilate_r), cfg.erode_r)
    return hard, feather_contours(hard, cfg.feather_w)
