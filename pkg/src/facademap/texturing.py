"""Facade textures: view selection, ortho-rectification, mosaicing, balance.

The ortho grid parameterizes the facade plane by (s, z): s in meters along
e1->e2, z altitude, pixel centers at half steps, anchored at (s=0,
z=z_bottom). Rasters are stored top row first (max z) so they export
directly as images. Each retained view is resampled onto that grid with
bilinear color lookup, excluding pixels whose projection lands on the view's
hard occlusion mask; the mosaic then keeps, per pixel, the valid sample with
the highest score (view score demoted near mask contours by the soft mask).
Pixels valid in no view are holes, exported separately for external
inpainting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import FacadeQuad, PinholeCamera, project_points

__all__ = [
    "OrthoGrid",
    "OrthoLayer",
    "OrthoFrame",
    "select_views",
    "rectify_view",
    "mosaic",
    "gray_world_balance",
    "export_hole_map",
]


@dataclass(frozen=True)
class OrthoGrid:
    """Facade-plane raster geometry shared by layers and mosaics."""

    e1: tuple[float, float]
    e2: tuple[float, float]
    z_bottom: float
    gsd: float
    n_s: int
    n_z: int

    @classmethod
    def for_quad(cls, quad: FacadeQuad, gsd: float) -> "OrthoGrid":
        if gsd <= 0:
            raise ValueError(f"ortho gsd must be > 0, got {gsd}")
        n_s = max(1, math.ceil(quad.length / gsd - 1e-9))
        n_z = max(1, math.ceil((quad.z_top - quad.z_bottom) / gsd - 1e-9))
        return cls(quad.e1, quad.e2, quad.z_bottom, gsd, n_s, n_z)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_z, self.n_s)

    def axis(self) -> np.ndarray:
        d = np.array([self.e2[0] - self.e1[0], self.e2[1] - self.e1[1]])
        return d / np.linalg.norm(d)

    def pixel_world_points(self) -> np.ndarray:
        """World coordinates of all pixel centers, shape (n_z, n_s, 3).

        Row 0 is the top of the facade.
        """
        u = self.axis()
        s = (np.arange(self.n_s) + 0.5) * self.gsd
        z = self.z_bottom + (np.arange(self.n_z)[::-1] + 0.5) * self.gsd
        x = self.e1[0] + s[None, :] * u[0]
        y = self.e1[1] + s[None, :] * u[1]
        out = np.empty((self.n_z, self.n_s, 3))
        out[:, :, 0] = x
        out[:, :, 1] = y
        out[:, :, 2] = z[:, None]
        return out

    def matches(self, other: "OrthoGrid", tol: float = 1e-9) -> bool:
        return (
            self.n_s == other.n_s
            and self.n_z == other.n_z
            and abs(self.gsd - other.gsd) <= tol
            and abs(self.z_bottom - other.z_bottom) <= tol
            and abs(self.e1[0] - other.e1[0]) <= tol
            and abs(self.e1[1] - other.e1[1]) <= tol
            and abs(self.e2[0] - other.e2[0]) <= tol
            and abs(self.e2[1] - other.e2[1]) <= tol
        )


@dataclass
class OrthoLayer:
    """One view resampled onto the ortho grid."""

    grid: OrthoGrid
    view_index: int
    rgb: np.ndarray  # (n_z, n_s, 3) float32, defined where valid
    valid: np.ndarray  # (n_z, n_s) bool
    score: np.ndarray  # (n_z, n_s) float32, 0 where invalid


@dataclass
class OrthoFrame:
    """Mosaiced facade texture with per-pixel provenance."""

    grid: OrthoGrid
    rgb: np.ndarray  # (n_z, n_s, 3) uint8
    valid: np.ndarray  # (n_z, n_s) bool; False = hole
    source: np.ndarray  # (n_z, n_s) int32 view index, -1 at holes

    @property
    def hole_fraction(self) -> float:
        return float(np.count_nonzero(~self.valid)) / self.valid.size


def _clip_polygon(poly: np.ndarray, width: float, height: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against [0, w] x [0, h]."""
    edges = [
        (lambda p: p[0] >= 0.0, 0, 0.0),
        (lambda p: p[0] <= width, 0, width),
        (lambda p: p[1] >= 0.0, 1, 0.0),
        (lambda p: p[1] <= height, 1, height),
    ]
    pts = [np.asarray(p, dtype=float) for p in poly]
    for inside, axis, level in edges:
        if not pts:
            break
        nxt = []
        for i, cur in enumerate(pts):
            prev = pts[i - 1]
            cur_in, prev_in = inside(cur), inside(prev)
            if cur_in != prev_in:
                # intersection with the clip line axis == level
                f = (level - prev[axis]) / (cur[axis] - prev[axis])
                nxt.append(prev + f * (cur - prev))
            if cur_in:
                nxt.append(cur)
        pts = nxt
    return np.array(pts) if pts else np.empty((0, 2))


def _polygon_area(poly: np.ndarray) -> float:
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def view_score(cam: PinholeCamera, quad: FacadeQuad) -> float:
    """Fronto-parallelism over distance: |cos(normal, sight line)| / range."""
    centroid = quad.centroid()
    ray = centroid - cam.pose.center
    dist = float(np.linalg.norm(ray))
    if dist <= 0:
        return 0.0
    n3 = np.array([quad.plane.nx, quad.plane.ny, 0.0])
    return abs(float(np.dot(n3, ray))) / dist / dist


def select_views(
    cameras: list[PinholeCamera],
    quad: FacadeQuad,
    view_min_frac: float,
) -> list[tuple[int, float]]:
    """Retain cameras that see enough of the quad, with their scores.

    A camera qualifies iff all four quad corners have positive depth and the
    projected quad's intersection with the image rectangle covers at least
    view_min_frac of the image area. An empty result just means the facade
    stays untextured.
    """
    corners = quad.vertices()
    retained = []
    for idx, cam in enumerate(cameras):
        uv, valid = project_points(cam, corners)
        if not valid.all():
            continue
        clipped = _clip_polygon(uv, float(cam.width), float(cam.height))
        frac = _polygon_area(clipped) / (cam.width * cam.height)
        if frac >= view_min_frac:
            retained.append((idx, view_score(cam, quad)))
    return retained


def _bilinear(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear sample at continuous (u, v), taps clamped to the frame."""
    h, w = image.shape[0], image.shape[1]
    img = image.astype(np.float32, copy=False)
    u = np.clip(u, 0.0, w - 1.0)
    v = np.clip(v, 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (u - u0).astype(np.float32)
    fv = (v - v0).astype(np.float32)
    if image.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    return (
        img[v0, u0] * (1 - fu) * (1 - fv)
        + img[v0, u1] * fu * (1 - fv)
        + img[v1, u0] * (1 - fu) * fv
        + img[v1, u1] * fu * fv
    )


def rectify_view(
    cam: PinholeCamera,
    image: np.ndarray,
    hard_mask: np.ndarray,
    soft_mask: np.ndarray,
    quad: FacadeQuad,
    gsd: float,
    score: float = 1.0,
    view_index: int = 0,
    grid: OrthoGrid | None = None,
) -> OrthoLayer:
    """Resample one view onto the facade ortho grid.

    A pixel is valid iff its plane point projects in frame with positive
    depth and the hard mask is unset at the projected (rounded) pixel.
    Colors are bilinear; per-pixel score is the view score attenuated by the
    soft-mask weight sampled at the continuous projection.
    """
    if grid is None:
        grid = OrthoGrid.for_quad(quad, gsd)
    world = grid.pixel_world_points()
    uv, in_front = project_points(cam, world.reshape(-1, 3))
    u = uv[:, 0].reshape(grid.shape)
    v = uv[:, 1].reshape(grid.shape)
    in_front = in_front.reshape(grid.shape)
    inframe = in_front & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)

    usafe = np.where(inframe, u, 0.0)
    vsafe = np.where(inframe, v, 0.0)
    cols = np.minimum(np.floor(usafe + 0.5).astype(np.int64), cam.width - 1)
    rows = np.minimum(np.floor(vsafe + 0.5).astype(np.int64), cam.height - 1)
    valid = inframe & ~hard_mask[rows, cols]

    rgb = np.zeros((*grid.shape, 3), dtype=np.float32)
    rgb[valid] = _bilinear(image, usafe, vsafe)[valid]
    weight = _bilinear(soft_mask.astype(np.float32), usafe, vsafe)
    scores = np.where(valid, np.float32(score) * (1.0 - weight), np.float32(0.0))
    return OrthoLayer(grid=grid, view_index=view_index, rgb=rgb, valid=valid, score=scores)


def mosaic(grid: OrthoGrid, layers: list[OrthoLayer]) -> OrthoFrame:
    """Per-pixel best-score composite of the layers.

    Ties go to the lowest view index; pixels valid in no layer become holes.
    Zero layers yield the all-hole frame.
    """
    shape = grid.shape
    if not layers:
        return OrthoFrame(
            grid=grid,
            rgb=np.zeros((*shape, 3), dtype=np.uint8),
            valid=np.zeros(shape, dtype=bool),
            source=np.full(shape, -1, dtype=np.int32),
        )
    layers = sorted(layers, key=lambda l: l.view_index)
    for layer in layers:
        if not layer.grid.matches(grid):
            raise ValueError("mosaic layers must share one ortho grid")
    scores = np.stack([np.where(l.valid, l.score, -np.inf) for l in layers])
    best = scores.argmax(axis=0)  # first max wins: lowest view index
    any_valid = np.stack([l.valid for l in layers]).any(axis=0)

    all_rgb = np.stack([l.rgb for l in layers])
    iz, is_ = np.indices(shape)
    chosen = all_rgb[best, iz, is_]
    rgb = np.floor(chosen + 0.5).clip(0, 255).astype(np.uint8)
    rgb[~any_valid] = 0
    view_ids = np.array([l.view_index for l in layers], dtype=np.int32)
    source = np.where(any_valid, view_ids[best], np.int32(-1))
    return OrthoFrame(grid=grid, rgb=rgb, valid=any_valid, source=source.astype(np.int32))


def gray_world_balance(frame: OrthoFrame) -> OrthoFrame:
    """Scale each channel so the valid-pixel means agree (gray-world).

    Channels are scaled by mean/channel_mean, clamped to [0, 255], rounded
    half-up. Holes are untouched; an all-hole frame is returned unchanged.
    """
    valid = frame.valid
    out = frame.rgb.copy()
    if not valid.any():
        return OrthoFrame(frame.grid, out, valid.copy(), frame.source.copy())
    vals = frame.rgb[valid].astype(np.float64)
    means = vals.mean(axis=0)
    gray = means.mean()
    scale = np.where(means > 0, gray / np.where(means > 0, means, 1.0), 1.0)
    balanced = np.floor(frame.rgb[valid] * scale + 0.5).clip(0, 255).astype(np.uint8)
    out[valid] = balanced
    return OrthoFrame(frame.grid, out, valid.copy(), frame.source.copy())


def export_hole_map(frame: OrthoFrame) -> np.ndarray:
    """Boolean mask set exactly at hole pixels, same grid as the frame."""
    return ~frame.valid
