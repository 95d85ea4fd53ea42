"""Geometric primitives shared by the whole pipeline.

Conventions, used consistently everywhere:

* World frame: x/y are projected planimetric coordinates in meters, z is
  altitude in meters.
* Image frame: origin at the top-left corner, u grows rightward, v grows
  downward, units are pixels.
* Camera frame: x right, y down, z forward along the optical axis; a point
  is in front of the camera iff its camera-frame depth is positive.
* Poses are stored camera-to-world; projecting a world point applies the
  inverse transform.

All types are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryError",
    "Point3",
    "Segment2",
    "VerticalPlane",
    "FacadeQuad",
    "RigidPose",
    "PinholeCamera",
    "project_points",
    "project_to_image",
    "signed_plane_distance",
    "segment_frame_coords",
]

MIN_DEPTH = 1e-9


class GeometryError(ValueError):
    """A geometric invariant or precondition was violated."""


@dataclass(frozen=True)
class Point3:
    """A 3D world point (planimetric x, y plus altitude z, all meters)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Segment2:
    """A planimetric line segment with an identifier (a building-map edge)."""

    id: int
    p1: tuple[float, float]
    p2: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "p1", (float(self.p1[0]), float(self.p1[1])))
        object.__setattr__(self, "p2", (float(self.p2[0]), float(self.p2[1])))
        if self.length <= 1e-6:
            raise GeometryError(f"degenerate segment {self.id}: endpoints coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def direction(self) -> np.ndarray:
        """Unit vector from p1 to p2."""
        d = np.array([self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]])
        return d / np.linalg.norm(d)


@dataclass(frozen=True)
class VerticalPlane:
    """A vertical plane nx*x + ny*y = d with unit planimetric normal."""

    nx: float
    ny: float
    d: float

    def __post_init__(self):
        if abs(self.nx * self.nx + self.ny * self.ny - 1.0) > 1e-9:
            raise GeometryError(f"plane normal ({self.nx}, {self.ny}) is not unit length")

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.nx, self.ny])

    def flipped(self) -> "VerticalPlane":
        """Same plane with the normal pointing the other way."""
        return VerticalPlane(-self.nx, -self.ny, -self.d)


def _as_xy(p) -> np.ndarray:
    """Planimetric components of a Point3 or an (..., 2|3) array-like."""
    if isinstance(p, Point3):
        return p.xy()
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1] not in (2, 3):
        raise GeometryError(f"expected planimetric or 3D coordinates, got shape {arr.shape}")
    return arr[..., :2]


def signed_plane_distance(plane: VerticalPlane, p):
    """Signed planimetric distance to the plane, positive on the normal side.

    Accepts a single point (Point3 or 2/3-sequence) or an (N, 2|3) array;
    returns a float or an (N,) array accordingly.
    """
    xy = _as_xy(p)
    dist = xy[..., 0] * plane.nx + xy[..., 1] * plane.ny - plane.d
    if np.ndim(dist) == 0:
        return float(dist)
    return dist


def segment_frame_coords(seg: Segment2, p):
    """Coordinates of p in the segment frame: (s along p1->p2, t perpendicular).

    s is the scalar projection of (p - p1) onto the unit direction, t the
    signed perpendicular offset (positive to the left of the direction).
    Altitude is ignored. Vectorizes over (N, 2|3) arrays.
    """
    xy = _as_xy(p)
    d = seg.direction
    rx = xy[..., 0] - seg.p1[0]
    ry = xy[..., 1] - seg.p1[1]
    s = rx * d[0] + ry * d[1]
    t = ry * d[0] - rx * d[1]
    if np.ndim(s) == 0:
        return float(s), float(t)
    return s, t


@dataclass(frozen=True)
class FacadeQuad:
    """A vertical facade quadrilateral: planimetric endpoints on a fitted
    plane plus bottom/top altitudes, with the top-roughness score and the
    level-of-detail flag that produced the top altitude."""

    e1: tuple[float, float]
    e2: tuple[float, float]
    z_bottom: float
    z_top: float
    plane: VerticalPlane
    msd: float
    lod_flag: str  # "smooth" | "detailed"

    def __post_init__(self):
        object.__setattr__(self, "e1", (float(self.e1[0]), float(self.e1[1])))
        object.__setattr__(self, "e2", (float(self.e2[0]), float(self.e2[1])))
        if self.z_top <= self.z_bottom:
            raise GeometryError(
                f"inverted altitude band: z_top {self.z_top} <= z_bottom {self.z_bottom}"
            )
        if self.msd < 0:
            raise GeometryError(f"negative top-roughness score {self.msd}")
        if self.lod_flag not in ("smooth", "detailed"):
            raise GeometryError(f"unknown lod flag {self.lod_flag!r}")
        for e in (self.e1, self.e2):
            if abs(signed_plane_distance(self.plane, e)) > 1e-6:
                raise GeometryError(f"endpoint {e} is off the facade plane")
        if math.hypot(self.e2[0] - self.e1[0], self.e2[1] - self.e1[1]) <= 1e-6:
            raise GeometryError("facade endpoints coincide")

    @property
    def length(self) -> float:
        return math.hypot(self.e2[0] - self.e1[0], self.e2[1] - self.e1[1])

    @property
    def axis(self) -> np.ndarray:
        """Unit planimetric direction from e1 to e2."""
        d = np.array([self.e2[0] - self.e1[0], self.e2[1] - self.e1[1]])
        return d / np.linalg.norm(d)

    def vertices(self) -> np.ndarray:
        """Corners ordered (e1, z_bottom), (e2, z_bottom), (e2, z_top), (e1, z_top)."""
        return np.array(
            [
                [self.e1[0], self.e1[1], self.z_bottom],
                [self.e2[0], self.e2[1], self.z_bottom],
                [self.e2[0], self.e2[1], self.z_top],
                [self.e1[0], self.e1[1], self.z_top],
            ]
        )

    def centroid(self) -> np.ndarray:
        return self.vertices().mean(axis=0)


@dataclass(frozen=True)
class RigidPose:
    """Camera-to-world rigid transform: p_world = R @ p_cam + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise GeometryError(f"rotation must be 3x3, got {r.shape}")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise GeometryError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise GeometryError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def world_to_camera(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return (pts - self.translation) @ self.rotation

    def camera_to_world(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.translation

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.translation


@dataclass(frozen=True)
class PinholeCamera:
    """Ideal pinhole camera (no distortion) with a georeferenced pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidPose

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"image size must be positive, got {self.width}x{self.height}")


def project_points(cam: PinholeCamera, pts) -> tuple[np.ndarray, np.ndarray]:
    """Project world points into continuous pixel coordinates.

    Returns (uv, valid): uv is (..., 2) with NaN where invalid, valid is a
    boolean array marking points strictly in front of the camera. No
    frame-bounds check is applied; callers clip.
    """
    pts = np.asarray(pts, dtype=float)
    pc = cam.pose.world_to_camera(pts)
    z = pc[..., 2]
    valid = z > MIN_DEPTH
    zsafe = np.where(valid, z, 1.0)
    u = cam.cx + cam.fx * pc[..., 0] / zsafe
    v = cam.cy + cam.fy * pc[..., 1] / zsafe
    uv = np.stack([u, v], axis=-1)
    uv[~valid] = np.nan
    return uv, valid


def project_to_image(cam: PinholeCamera, p) -> tuple[float, float] | None:
    """Project a single world point; None when at or behind the camera."""
    arr = p.as_array() if isinstance(p, Point3) else np.asarray(p, dtype=float)
    uv, valid = project_points(cam, arr.reshape(1, 3))
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1])
