"""Planimetric accumulation grid and the vertical/surface point split.

Every 3D point votes in the horizontal grid cell its (x, y) falls into.
Cells use half-open intervals [ox + u*step, ox + (u+1)*step) so boundary
ties resolve deterministically, and the origin snaps down to a multiple of
the step so translated bounding boxes produce reproducible grids. Points in
cells with score > 1 are the vertical-structure candidates ("hyper-points");
single-vote cells hold the potential flat surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AccumulationGrid", "build_accumulation_map", "split_hyper_points", "score_image"]

_MAX_CELLS = 200_000_000  # sanity cap; a stray far point would explode the raster


@dataclass
class AccumulationGrid:
    """Cell scores plus the retained point->cell relation.

    The grid keeps a CSR-style index (points sorted by flat cell id) so the
    members of any cell can be listed without a per-cell Python structure.
    """

    origin: tuple[float, float]
    step: float
    n_u: int
    n_v: int
    scores: np.ndarray  # (n_u, n_v) int64
    cell_of_point: np.ndarray  # (N, 2) int64, (u, v) per input point
    _order: np.ndarray  # (N,) point indices sorted by flat cell
    _starts: np.ndarray  # (n_u * n_v + 1,) CSR boundaries

    @property
    def point_count(self) -> int:
        return int(self.cell_of_point.shape[0])

    def score_at(self, u: int, v: int) -> int:
        return int(self.scores[u, v])

    def points_in_cell(self, u: int, v: int) -> np.ndarray:
        """Indices of the points that voted in cell (u, v), ascending."""
        flat = u * self.n_v + v
        return self._order[self._starts[flat] : self._starts[flat + 1]]


def build_accumulation_map(points, step: float) -> AccumulationGrid:
    """Vote every point into the horizontal grid of the given step."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] not in (2, 3):
        raise ValueError(f"expected (N, 2|3) points, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("cannot build an accumulation map from zero points")
    if step <= 0:
        raise ValueError(f"grid step must be > 0, got {step}")

    x = pts[:, 0]
    y = pts[:, 1]
    ox = np.floor(x.min() / step) * step
    oy = np.floor(y.min() / step) * step
    u = np.floor((x - ox) / step).astype(np.int64)
    v = np.floor((y - oy) / step).astype(np.int64)
    n_u = int(u.max()) + 1
    n_v = int(v.max()) + 1
    if n_u * n_v > _MAX_CELLS:
        raise ValueError(f"grid of {n_u}x{n_v} cells exceeds the sanity cap")

    flat = u * n_v + v
    counts = np.bincount(flat, minlength=n_u * n_v)
    order = np.argsort(flat, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)])
    return AccumulationGrid(
        origin=(float(ox), float(oy)),
        step=float(step),
        n_u=n_u,
        n_v=n_v,
        scores=counts.reshape(n_u, n_v),
        cell_of_point=np.stack([u, v], axis=1),
        _order=order,
        _starts=starts,
    )


def split_hyper_points(grid: AccumulationGrid) -> tuple[np.ndarray, np.ndarray]:
    """Partition point indices into (hyper-points, surface complement).

    Hyper-points live in cells scoring > 1. Both arrays are ascending and
    together cover every indexed point exactly once.
    """
    per_point_score = grid.scores[grid.cell_of_point[:, 0], grid.cell_of_point[:, 1]]
    hyper = np.flatnonzero(per_point_score > 1)
    surface = np.flatnonzero(per_point_score == 1)
    return hyper, surface


def score_image(grid: AccumulationGrid) -> np.ndarray:
    """Debug heat image of the cell scores, clamped to 255.

    Row 0 is the maximum-y edge so north stays up in image viewers.
    """
    clipped = np.minimum(grid.scores, 255).astype(np.uint8)
    return clipped.T[::-1, :].copy()
