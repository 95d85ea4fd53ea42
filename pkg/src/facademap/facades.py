"""Fit one vertical facade quadrilateral per cluster.

The dominant plane is a total-least-squares fit on the planimetric
coordinates (centroid plus minor eigenvector of the 2x2 covariance), which
is exactly the vertical-plane restriction of a conventional least-squares
adjustment. Bottom altitude comes from the sensor trajectory (robust to
foreground occlusion); top altitude from per-sweep maxima, switching between
their median (smooth tops) and the cluster maximum (detailed tops) on the
mean-square deviation of those maxima.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clusters import FacadeCluster
from .dataset import Dataset, LaserFrame, PipelineConfig
from .geometry import FacadeQuad, Segment2, VerticalPlane, signed_plane_distance

__all__ = [
    "DegenerateClusterError",
    "TopProfile",
    "fit_vertical_plane",
    "project_endpoints",
    "bottom_altitude",
    "top_altitude",
    "assemble_quad",
    "build_facade_quad",
    "orient_quad_to_street",
]


class DegenerateClusterError(ValueError):
    pass


@dataclass(frozen=True)
class TopProfile:
    """Highest member altitude per laser sweep, with summary statistics.

    The median of an even-length list is the lower of the two middle values,
    so it is always an observed altitude.
    """

    frame_tops: tuple[tuple[int, float], ...]  # (frame_id, z_max), by frame_id
    median: float
    msd: float


def fit_vertical_plane(points, sensor_positions=None) -> VerticalPlane:
    """Total-least-squares vertical plane through the cluster.

    Minimizes the sum of squared perpendicular planimetric distances. When
    sensor positions are given, the normal is oriented so that the majority
    of them lie on the positive side (the street side); otherwise the
    orientation is canonicalized to a lexicographically positive normal.
    """
    xy = np.asarray(points, dtype=np.float64)[:, :2]
    if xy.shape[0] < 2:
        raise DegenerateClusterError(f"need >= 2 points to fit a plane, got {xy.shape[0]}")
    centroid = xy.mean(axis=0)
    centered = xy - centroid
    cov = centered.T @ centered / xy.shape[0]
    evals, evecs = np.linalg.eigh(cov)  # ascending
    if evals[1] < 1e-12:
        raise DegenerateClusterError("cluster is planimetrically degenerate (single point)")
    if evals[1] - evals[0] <= 1e-12:
        raise DegenerateClusterError("cluster covariance is isotropic; plane direction undefined")
    normal = evecs[:, 0]
    nx, ny = float(normal[0]), float(normal[1])
    d = nx * centroid[0] + ny * centroid[1]
    plane = VerticalPlane(nx, ny, d)

    if sensor_positions is not None and len(sensor_positions) > 0:
        side = signed_plane_distance(plane, np.asarray(sensor_positions, dtype=float))
        if np.count_nonzero(side > 0) * 2 < len(side):
            plane = plane.flipped()
    elif plane.nx < 0 or (plane.nx == 0 and plane.ny < 0):
        plane = plane.flipped()
    return plane


def project_endpoints(plane: VerticalPlane, seg: Segment2) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal projection of the segment endpoints onto the plane."""
    out = []
    for p in (seg.p1, seg.p2):
        t = signed_plane_distance(plane, p)
        out.append(np.array([p[0] - t * plane.nx, p[1] - t * plane.ny]))
    if np.linalg.norm(out[0] - out[1]) <= 1e-9:
        raise DegenerateClusterError(
            f"segment {seg.id} is perpendicular to the fitted plane; projected endpoints coincide"
        )
    return out[0], out[1]


def bottom_altitude(frame_ids, frames: dict[int, LaserFrame], cfg: PipelineConfig) -> float:
    """Facade/ground altitude from the sensor trajectory.

    Mean sensor altitude over the distinct sweeps that voted in the cluster,
    minus the vehicle height, plus the standard curb height. Duplicate
    returns from one sweep do not weight the mean.
    """
    frame_ids = np.asarray(frame_ids, dtype=np.int64)
    if frame_ids.size == 0:
        raise ValueError("cluster has no laser frames")
    distinct = np.unique(frame_ids)
    z = np.array([frames[int(f)].sensor_pos.z for f in distinct])
    return float(z.mean() - cfg.h_vehicle + cfg.h_curb)


def top_altitude(z_values, frame_ids, tau_msd: float) -> tuple[float, TopProfile, str]:
    """Top altitude plus the per-sweep top profile and the LoD flag.

    msd is the mean squared deviation of the per-sweep maxima from their
    mean. Above tau_msd the cluster maximum is kept ("detailed"), otherwise
    the median of the per-sweep maxima smooths small discontinuities
    ("smooth").
    """
    z = np.asarray(z_values, dtype=np.float64)
    fids = np.asarray(frame_ids, dtype=np.int64)
    if z.size == 0:
        raise ValueError("cluster has no points")
    order = np.argsort(fids, kind="stable")
    sorted_fids = fids[order]
    boundaries = np.flatnonzero(np.diff(sorted_fids)) + 1
    group_starts = np.concatenate([[0], boundaries])
    maxima = np.maximum.reduceat(z[order], group_starts)
    top_fids = sorted_fids[group_starts]

    mean = maxima.mean()
    msd = float(np.mean((maxima - mean) ** 2))
    ordered = np.sort(maxima)
    median = float(ordered[(ordered.size - 1) // 2])
    profile = TopProfile(
        frame_tops=tuple((int(f), float(m)) for f, m in zip(top_fids, maxima)),
        median=median,
        msd=msd,
    )
    if msd > tau_msd:
        return float(z.max()), profile, "detailed"
    return median, profile, "smooth"


def assemble_quad(
    plane: VerticalPlane,
    e1,
    e2,
    z_bottom: float,
    z_top: float,
    msd: float,
    lod_flag: str,
) -> FacadeQuad:
    """Combine planimetric and altimetric delimitations into the quad."""
    if z_top <= z_bottom:
        raise ValueError(
            f"inverted altitude band (z_top {z_top} <= z_bottom {z_bottom}); "
            "corrupt data or configuration"
        )
    return FacadeQuad(
        e1=(float(e1[0]), float(e1[1])),
        e2=(float(e2[0]), float(e2[1])),
        z_bottom=z_bottom,
        z_top=z_top,
        plane=plane,
        msd=msd,
        lod_flag=lod_flag,
    )


def orient_quad_to_street(quad: FacadeQuad, sensor_positions) -> FacadeQuad:
    """Flip the quad's plane normal if the majority of sensor positions lie
    on its negative side (used after parsing quads, which drops orientation)."""
    side = signed_plane_distance(quad.plane, np.asarray(sensor_positions, dtype=float))
    if np.count_nonzero(side > 0) * 2 < len(side):
        return FacadeQuad(
            quad.e1,
            quad.e2,
            quad.z_bottom,
            quad.z_top,
            quad.plane.flipped(),
            quad.msd,
            quad.lod_flag,
        )
    return quad


def build_facade_quad(
    dataset: Dataset,
    cluster: FacadeCluster,
    segment: Segment2,
    cfg: PipelineConfig,
) -> FacadeQuad:
    """Full per-cluster fit: plane, endpoints, altitudes, quad."""
    pts = dataset.points[cluster.point_indices]
    fids = dataset.frame_ids[cluster.point_indices]
    sensors = dataset.sensor_positions(np.unique(fids))
    plane = fit_vertical_plane(pts, sensors)
    e1, e2 = project_endpoints(plane, segment)
    z_bottom = bottom_altitude(fids, dataset.frames, cfg)
    z_top, profile, lod = top_altitude(pts[:, 2], fids, cfg.tau_msd)
    return assemble_quad(plane, e1, e2, z_bottom, z_top, profile.msd, lod)
