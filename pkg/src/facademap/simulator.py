"""Synthetic street scenes with ground truth.

A scene is a straight vehicle trajectory on a flat road, a set of vertical
textured facade rectangles, optional occluder primitives (sphere, axis
aligned box, vertical cylinder) standing between the trajectory and the
facades, and pinhole cameras. The laser is a vertical fan perpendicular to
the trajectory, one sweep every `frame_spacing` meters, with configurable
elevation range and rays per sweep. Camera renders are flat-albedo ray
casts: the pipeline under test cares about geometry and occlusion, not
photometry. Everything is deterministic given the scene and a seed.

Scene files use `key = value` lines with '#' comments, grouped in repeatable
sections::

    [scene]     globals (trajectory, sensor fan, noise, ...)
    [facade]    one vertical textured rectangle per section
    [occluder]  one primitive per section
    [camera]    one pinhole camera per section
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .dataset import LaserFrame
from .geometry import (
    FacadeQuad,
    PinholeCamera,
    Point3,
    RigidPose,
    Segment2,
    VerticalPlane,
    signed_plane_distance,
)
from .texturing import OrthoGrid

__all__ = [
    "SceneError",
    "FacadeSpec",
    "OccluderSpec",
    "CameraRig",
    "SceneSpec",
    "GroundTruth",
    "load_scene",
    "ray_cast",
    "cast_rays",
    "simulate_laser",
    "render_view",
    "silhouette_mask",
    "true_quads",
    "true_texture",
    "ground_truth",
    "perturb_cadastre",
    "simulate_scene_file",
    "read_labels",
    "LABEL_NAMES",
    "LABEL_IDS",
]

_EPS_T = 1e-6

# per-point labels emitted by the laser simulation
LABEL_MISS, LABEL_FACADE, LABEL_GROUND, LABEL_OCCLUDER = 0, 1, 2, 3
LABEL_NAMES = {LABEL_FACADE: "facade", LABEL_GROUND: "ground", LABEL_OCCLUDER: "occluder"}
LABEL_IDS = {name: lid for lid, name in LABEL_NAMES.items()}


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class FacadeSpec:
    """A vertical textured rectangle, optionally with a crenellated top."""

    seg_id: int
    p1: tuple[float, float]
    p2: tuple[float, float]
    z_bottom: float
    z_top: float
    texture: str  # checker | stripes | window_grid | flat
    period: float
    color_a: tuple[int, int, int]
    color_b: tuple[int, int, int]
    cren_amp: float = 0.0
    cren_period: float = 2.0

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def direction(self) -> np.ndarray:
        d = np.array([self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]])
        return d / np.linalg.norm(d)

    @property
    def z_max(self) -> float:
        return self.z_top + self.cren_amp

    def top_at(self, s):
        """Top altitude as a function of the along-facade coordinate."""
        if self.cren_amp == 0.0:
            return np.full_like(np.asarray(s, dtype=float), self.z_top)
        parity = np.floor(np.asarray(s, dtype=float) / self.cren_period).astype(np.int64) % 2
        return self.z_top + self.cren_amp * np.where(parity == 0, 1.0, -1.0)


@dataclass(frozen=True)
class OccluderSpec:
    kind: str  # sphere | box | cylinder
    albedo: tuple[int, int, int]
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5
    half_size: tuple[float, float, float] = (0.5, 0.5, 0.5)
    z_range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class CameraRig:
    camera: PinholeCamera
    gain: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class SceneSpec:
    ground_z: float
    ground_albedo: tuple[int, int, int]
    sky: tuple[int, int, int]
    sensor_height: float
    frame_spacing: float
    fan_min_deg: float
    fan_max_deg: float
    rays_per_frame: int
    fan_sides: tuple[str, ...]
    noise_sigma: float
    cadastre_noise: float
    traj_start: tuple[float, float]
    traj_dir: tuple[float, float]
    traj_length: float
    facades: tuple[FacadeSpec, ...]
    occluders: tuple[OccluderSpec, ...]
    cameras: tuple[CameraRig, ...]


@dataclass
class GroundTruth:
    """Oracle outputs: true quads/textures per facade, plus per-camera
    occluder silhouettes; per-laser-point labels come with the laser run."""

    quads: dict[int, FacadeQuad]
    textures: dict[int, np.ndarray]
    silhouettes: list[np.ndarray]
    labels: np.ndarray | None = None


# ---------------------------------------------------------------------------
# scene file parsing


def _parse_sections(path) -> list[tuple[str, dict, int]]:
    sections: list[tuple[str, dict, int]] = []
    current: dict | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if body.startswith("[") and body.endswith("]"):
                current = {}
                sections.append((body[1:-1].strip(), current, lineno))
                continue
            if current is None:
                raise SceneError(f"{path}:{lineno}: value outside any section")
            if "=" not in body:
                raise SceneError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = body.partition("=")
            current[key.strip()] = raw.strip()
    return sections


_REQUIRED = object()


def _take(sec: dict, key: str, conv, default=_REQUIRED, ctx: str = "scene"):
    if key not in sec:
        if default is _REQUIRED:
            raise SceneError(f"missing key {key!r} in [{ctx}] section")
        return default
    raw = sec.pop(key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise SceneError(f"bad value for {key!r} in [{ctx}] section: {exc}") from None


def _floats(n):
    def conv(raw):
        parts = tuple(float(t) for t in raw.split())
        if len(parts) != n:
            raise ValueError(f"expected {n} numbers, got {len(parts)}")
        return parts

    return conv


def _rgb(raw):
    parts = tuple(int(t) for t in raw.split())
    if len(parts) != 3 or any(not (0 <= c <= 255) for c in parts):
        raise ValueError("expected 3 values in 0..255")
    return parts


def _sides(raw):
    parts = tuple(raw.split())
    if not parts or any(p not in ("left", "right") for p in parts):
        raise ValueError("fan sides must be 'left' and/or 'right'")
    return parts


def _look_at_pose(pos, target) -> RigidPose:
    pos = np.asarray(pos, dtype=float)
    fwd = np.asarray(target, dtype=float) - pos
    norm = np.linalg.norm(fwd)
    if norm < 1e-9:
        raise SceneError("camera look_at coincides with its position")
    fwd = fwd / norm
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:
        raise SceneError("camera looks straight up/down; roll is undefined")
    right = right / rnorm
    down = np.cross(fwd, right)
    rot = np.column_stack([right, down, fwd])
    return RigidPose(rot, pos)


def _build_facade(sec: dict, lineno: int, path) -> FacadeSpec:
    ctx = f"facade@{lineno}"
    seg = _take(sec, "segment", _floats(4), ctx=ctx)
    fac = FacadeSpec(
        seg_id=_take(sec, "id", int, ctx=ctx),
        p1=(seg[0], seg[1]),
        p2=(seg[2], seg[3]),
        z_bottom=_take(sec, "z_bottom", float, 0.0, ctx=ctx),
        z_top=_take(sec, "z_top", float, ctx=ctx),
        texture=_take(sec, "texture", str, "checker", ctx=ctx),
        period=_take(sec, "period", float, 1.0, ctx=ctx),
        color_a=_take(sec, "color_a", _rgb, (200, 60, 40), ctx=ctx),
        color_b=_take(sec, "color_b", _rgb, (230, 220, 200), ctx=ctx),
        cren_amp=_take(sec, "crenellation_amp", float, 0.0, ctx=ctx),
        cren_period=_take(sec, "crenellation_period", float, 2.0, ctx=ctx),
    )
    if sec:
        raise SceneError(f"{path}:{lineno}: unknown facade keys {sorted(sec)}")
    if fac.texture not in ("checker", "stripes", "window_grid", "flat"):
        raise SceneError(f"{path}:{lineno}: unknown texture {fac.texture!r}")
    if fac.length <= 1e-6:
        raise SceneError(f"{path}:{lineno}: degenerate facade segment")
    if fac.z_top <= fac.z_bottom:
        raise SceneError(f"{path}:{lineno}: facade z_top must exceed z_bottom")
    if fac.period <= 0 or fac.cren_period <= 0 or fac.cren_amp < 0:
        raise SceneError(f"{path}:{lineno}: facade periods must be positive")
    return fac


def _build_occluder(sec: dict, lineno: int, path) -> OccluderSpec:
    ctx = f"occluder@{lineno}"
    kind = _take(sec, "kind", str, ctx=ctx)
    albedo = _take(sec, "albedo", _rgb, (40, 110, 45), ctx=ctx)
    if kind == "sphere":
        occ = OccluderSpec(
            kind,
            albedo,
            center=_take(sec, "center", _floats(3), ctx=ctx),
            radius=_take(sec, "radius", float, ctx=ctx),
        )
        ok = occ.radius > 0
    elif kind == "box":
        occ = OccluderSpec(
            kind,
            albedo,
            center=_take(sec, "center", _floats(3), ctx=ctx),
            half_size=_take(sec, "half_size", _floats(3), ctx=ctx),
        )
        ok = all(h > 0 for h in occ.half_size)
    elif kind == "cylinder":
        occ = OccluderSpec(
            kind,
            albedo,
            center=_take(sec, "center", _floats(2), ctx=ctx) + (0.0,),
            radius=_take(sec, "radius", float, ctx=ctx),
            z_range=_take(sec, "z_range", _floats(2), ctx=ctx),
        )
        ok = occ.radius > 0 and occ.z_range[1] > occ.z_range[0]
    else:
        raise SceneError(f"{path}:{lineno}: unknown occluder kind {kind!r}")
    if sec:
        raise SceneError(f"{path}:{lineno}: unknown occluder keys {sorted(sec)}")
    if not ok:
        raise SceneError(f"{path}:{lineno}: non-positive occluder dimensions")
    return occ


def _build_camera(sec: dict, lineno: int, path) -> CameraRig:
    ctx = f"camera@{lineno}"
    pos = _take(sec, "pos", _floats(3), ctx=ctx)
    target = _take(sec, "look_at", _floats(3), ctx=ctx)
    width = _take(sec, "width", int, 480, ctx=ctx)
    height = _take(sec, "height", int, 270, ctx=ctx)
    fx = _take(sec, "fx", float, 0.625 * width, ctx=ctx)
    fy = _take(sec, "fy", float, fx, ctx=ctx)
    cx = _take(sec, "cx", float, width / 2.0, ctx=ctx)
    cy = _take(sec, "cy", float, height / 2.0, ctx=ctx)
    gain = _take(sec, "gain", _floats(3), (1.0, 1.0, 1.0), ctx=ctx)
    if sec:
        raise SceneError(f"{path}:{lineno}: unknown camera keys {sorted(sec)}")
    cam = PinholeCamera(fx, fy, cx, cy, width, height, _look_at_pose(pos, target))
    return CameraRig(cam, gain)


def load_scene(path) -> SceneSpec:
    sections = _parse_sections(path)
    globals_sec: dict = {}
    facades: list[FacadeSpec] = []
    occluders: list[OccluderSpec] = []
    cameras: list[CameraRig] = []
    for name, sec, lineno in sections:
        if name == "scene":
            globals_sec.update(sec)
        elif name == "facade":
            facades.append(_build_facade(sec, lineno, path))
        elif name == "occluder":
            occluders.append(_build_occluder(sec, lineno, path))
        elif name == "camera":
            cameras.append(_build_camera(sec, lineno, path))
        else:
            raise SceneError(f"{path}:{lineno}: unknown section [{name}]")

    sec = dict(globals_sec)
    traj_dir = _take(sec, "traj_dir", _floats(2), (1.0, 0.0))
    norm = math.hypot(*traj_dir)
    if norm < 1e-9:
        raise SceneError("trajectory direction is zero")
    scene = SceneSpec(
        ground_z=_take(sec, "ground_z", float, 0.0),
        ground_albedo=_take(sec, "ground_albedo", _rgb, (90, 90, 90)),
        sky=_take(sec, "sky", _rgb, (135, 206, 235)),
        sensor_height=_take(sec, "sensor_height", float, 2.5),
        frame_spacing=_take(sec, "frame_spacing", float, 0.25),
        fan_min_deg=_take(sec, "fan_min_deg", float, -20.0),
        fan_max_deg=_take(sec, "fan_max_deg", float, 60.0),
        rays_per_frame=_take(sec, "rays_per_frame", int, 201),
        fan_sides=_take(sec, "fan_sides", _sides, ("right",)),
        noise_sigma=_take(sec, "noise_sigma", float, 0.03),
        cadastre_noise=_take(sec, "cadastre_noise", float, 0.0),
        traj_start=_take(sec, "traj_start", _floats(2), (0.0, 0.0)),
        traj_dir=(traj_dir[0] / norm, traj_dir[1] / norm),
        traj_length=_take(sec, "traj_length", float),
        facades=tuple(facades),
        occluders=tuple(occluders),
        cameras=tuple(cameras),
    )
    if sec:
        raise SceneError(f"{path}: unknown scene keys {sorted(sec)}")
    if not scene.facades:
        raise SceneError(f"{path}: scene has no facades")
    if len({f.seg_id for f in scene.facades}) != len(scene.facades):
        raise SceneError(f"{path}: duplicate facade ids")
    if scene.frame_spacing <= 0 or scene.traj_length < 0:
        raise SceneError(f"{path}: bad trajectory parameters")
    if scene.rays_per_frame < 2 or scene.fan_max_deg <= scene.fan_min_deg:
        raise SceneError(f"{path}: bad fan parameters")
    if scene.noise_sigma < 0 or scene.cadastre_noise < 0:
        raise SceneError(f"{path}: noise amplitudes must be >= 0")
    return scene


# ---------------------------------------------------------------------------
# ray casting


def _facade_plane(fac: FacadeSpec) -> tuple[np.ndarray, float]:
    d = fac.direction
    n = np.array([-d[1], d[0]])  # left normal of p1->p2
    return n, float(n[0] * fac.p1[0] + n[1] * fac.p1[1])


def _facade_ts(fac: FacadeSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    n, pd = _facade_plane(fac)
    denom = d[:, 0] * n[0] + d[:, 1] * n[1]
    num = pd - (o[:, 0] * n[0] + o[:, 1] * n[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-12, num / denom, np.inf)
    tsafe = np.where(np.isfinite(t), t, 0.0)
    hit = o + tsafe[:, None] * d
    dirv = fac.direction
    s = (hit[:, 0] - fac.p1[0]) * dirv[0] + (hit[:, 1] - fac.p1[1]) * dirv[1]
    z = hit[:, 2]
    inside = (
        (t > _EPS_T)
        & np.isfinite(t)
        & (s >= 0.0)
        & (s <= fac.length)
        & (z >= fac.z_bottom)
        & (z <= fac.top_at(s))
    )
    return np.where(inside, t, np.inf)


def _ground_ts(scene: SceneSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(d[:, 2]) > 1e-12, (scene.ground_z - o[:, 2]) / d[:, 2], np.inf)
    return np.where(t > _EPS_T, t, np.inf)


def _sphere_ts(occ: OccluderSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    oc = o - np.asarray(occ.center)
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - occ.radius * occ.radius
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > _EPS_T, t0, np.where(t1 > _EPS_T, t1, np.inf))
    return np.where(disc >= 0.0, t, np.inf)


def _box_ts(occ: OccluderSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    lo = np.asarray(occ.center) - np.asarray(occ.half_size)
    hi = np.asarray(occ.center) + np.asarray(occ.half_size)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lo = (lo - o) / d
        t_hi = (hi - o) / d
    tmin = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
    tmax = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
    hit = (tmin <= tmax) & (tmax > _EPS_T)
    t = np.where(tmin > _EPS_T, tmin, tmax)
    return np.where(hit, t, np.inf)


def _cylinder_ts(occ: OccluderSpec, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    # vertical side surface only (thin posts; caps are negligible)
    cx, cy = occ.center[0], occ.center[1]
    ox = o[:, 0] - cx
    oy = o[:, 1] - cy
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = ox * d[:, 0] + oy * d[:, 1]
    c = ox * ox + oy * oy - occ.radius * occ.radius
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = b * b - a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - sq) / a
        t1 = (-b + sq) / a
    z0, z1 = occ.z_range
    zt0 = o[:, 2] + t0 * d[:, 2]
    zt1 = o[:, 2] + t1 * d[:, 2]
    ok0 = (t0 > _EPS_T) & (zt0 >= z0) & (zt0 <= z1)
    ok1 = (t1 > _EPS_T) & (zt1 >= z0) & (zt1 <= z1)
    t = np.where(ok0, t0, np.where(ok1, t1, np.inf))
    return np.where((disc >= 0.0) & (a > 1e-12), t, np.inf)


_OCCLUDER_TS = {"sphere": _sphere_ts, "box": _box_ts, "cylinder": _cylinder_ts}


def cast_rays(
    scene: SceneSpec, origins: np.ndarray, dirs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-hit cast of unit-direction rays against the whole scene.

    Returns (t, kind, index); kind 0 marks misses (t = inf there).
    """
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    best_t = np.full(o.shape[0], np.inf)
    kind = np.zeros(o.shape[0], dtype=np.int8)
    index = np.full(o.shape[0], -1, dtype=np.int32)

    t = _ground_ts(scene, o, d)
    closer = t < best_t
    best_t[closer] = t[closer]
    kind[closer] = LABEL_GROUND
    index[closer] = 0

    for i, fac in enumerate(scene.facades):
        t = _facade_ts(fac, o, d)
        closer = t < best_t
        best_t[closer] = t[closer]
        kind[closer] = LABEL_FACADE
        index[closer] = i

    for i, occ in enumerate(scene.occluders):
        t = _OCCLUDER_TS[occ.kind](occ, o, d)
        closer = t < best_t
        best_t[closer] = t[closer]
        kind[closer] = LABEL_OCCLUDER
        index[closer] = i

    return best_t, kind, index


def _texture_albedo(fac: FacadeSpec, s: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Procedural facade albedo at along/height coordinates (s, z)."""
    rel_z = np.asarray(z, dtype=float) - fac.z_bottom
    s = np.asarray(s, dtype=float)
    a = np.array(fac.color_a, dtype=np.uint8)
    b = np.array(fac.color_b, dtype=np.uint8)
    if fac.texture == "flat":
        pick_a = np.ones(s.shape, dtype=bool)
    elif fac.texture == "stripes":
        pick_a = np.floor(s / fac.period).astype(np.int64) % 2 == 0
    elif fac.texture == "window_grid":
        mullion = 0.2 * fac.period
        on_grid = (np.mod(s, fac.period) < mullion) | (np.mod(rel_z, fac.period) < mullion)
        pick_a = ~on_grid
    else:  # checker
        cells = np.floor(s / fac.period) + np.floor(rel_z / fac.period)
        pick_a = cells.astype(np.int64) % 2 == 0
    return np.where(pick_a[..., None], a, b)


def _hit_albedo(
    scene: SceneSpec, o: np.ndarray, d: np.ndarray, t: np.ndarray, kind: np.ndarray, index: np.ndarray
) -> np.ndarray:
    out = np.zeros((o.shape[0], 3), dtype=np.uint8)
    out[kind == LABEL_GROUND] = scene.ground_albedo
    tsafe = np.where(np.isfinite(t), t, 0.0)
    pts = o + tsafe[:, None] * d
    for i, fac in enumerate(scene.facades):
        sel = (kind == LABEL_FACADE) & (index == i)
        if not sel.any():
            continue
        dirv = fac.direction
        s = (pts[sel, 0] - fac.p1[0]) * dirv[0] + (pts[sel, 1] - fac.p1[1]) * dirv[1]
        out[sel] = _texture_albedo(fac, s, pts[sel, 2])
    for i, occ in enumerate(scene.occluders):
        out[(kind == LABEL_OCCLUDER) & (index == i)] = occ.albedo
    return out


def ray_cast(scene: SceneSpec, origin, direction):
    """Single-ray convenience: nearest hit as (t, (kind_name, index), albedo),
    or None on a miss. `direction` must be unit length."""
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise SceneError("ray direction must be unit length")
    o = np.asarray(origin, dtype=float).reshape(1, 3)
    t, kind, index = cast_rays(scene, o, d.reshape(1, 3))
    if kind[0] == LABEL_MISS:
        return None
    albedo = _hit_albedo(scene, o, d.reshape(1, 3), t, kind, index)[0]
    return float(t[0]), (LABEL_NAMES[int(kind[0])], int(index[0])), tuple(int(c) for c in albedo)


# ---------------------------------------------------------------------------
# laser and camera simulation


def _frame_sensors(scene: SceneSpec) -> np.ndarray:
    n_frames = int(math.floor(scene.traj_length / scene.frame_spacing + 1e-9)) + 1
    k = np.arange(n_frames)
    x = scene.traj_start[0] + k * scene.frame_spacing * scene.traj_dir[0]
    y = scene.traj_start[1] + k * scene.frame_spacing * scene.traj_dir[1]
    z = np.full(n_frames, scene.ground_z + scene.sensor_height)
    return np.stack([x, y, z], axis=1)


def _fan_directions(scene: SceneSpec) -> np.ndarray:
    """Unit ray directions of one sweep, all configured sides stacked."""
    theta = np.radians(np.linspace(scene.fan_min_deg, scene.fan_max_deg, scene.rays_per_frame))
    dx, dy = scene.traj_dir
    sides = {"left": np.array([-dy, dx, 0.0]), "right": np.array([dy, -dx, 0.0])}
    dirs = []
    for side in scene.fan_sides:
        perp = sides[side]
        dirs.append(
            np.cos(theta)[:, None] * perp[None, :]
            + np.sin(theta)[:, None] * np.array([0.0, 0.0, 1.0])[None, :]
        )
    return np.concatenate(dirs, axis=0)


def simulate_laser(
    scene: SceneSpec, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray, list[LaserFrame], np.ndarray]:
    """Sweep the laser fan along the trajectory.

    Returns (points, frame_ids, frames, labels). Rays that hit nothing emit
    no point. Isotropic gaussian noise of scene.noise_sigma is added to the
    hit positions when the sigma is positive (rng required then).
    """
    sensors = _frame_sensors(scene)
    fan = _fan_directions(scene)
    n_frames, n_rays = sensors.shape[0], fan.shape[0]
    origins = np.repeat(sensors, n_rays, axis=0)
    dirs = np.tile(fan, (n_frames, 1))
    t, kind, _ = cast_rays(scene, origins, dirs)
    hit = kind != LABEL_MISS
    points = origins[hit] + t[hit, None] * dirs[hit]
    frame_ids = np.repeat(np.arange(n_frames, dtype=np.int64), n_rays)[hit]
    labels = kind[hit].copy()
    if scene.noise_sigma > 0:
        if rng is None:
            raise SceneError("noise_sigma > 0 requires a random generator")
        points = points + rng.normal(0.0, scene.noise_sigma, points.shape)
    frames = [
        LaserFrame(int(i), Point3(float(s[0]), float(s[1]), float(s[2])))
        for i, s in enumerate(sensors)
    ]
    return points, frame_ids, frames, labels


def _pixel_rays(cam: PinholeCamera) -> tuple[np.ndarray, np.ndarray]:
    u, v = np.meshgrid(np.arange(cam.width), np.arange(cam.height))
    dirs_cam = np.stack(
        [(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones_like(u, dtype=float)], axis=-1
    ).reshape(-1, 3)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    dirs_world = dirs_cam @ cam.pose.rotation.T
    origins = np.broadcast_to(cam.pose.center, dirs_world.shape)
    return origins, dirs_world


def render_view(scene: SceneSpec, rig: CameraRig) -> np.ndarray:
    """Flat-albedo ray-cast render; sky color on misses, per-camera gains
    applied with half-up rounding."""
    cam = rig.camera
    origins, dirs = _pixel_rays(cam)
    t, kind, index = cast_rays(scene, origins, dirs)
    rgb = _hit_albedo(scene, origins, dirs, t, kind, index)
    rgb[kind == LABEL_MISS] = scene.sky
    shaded = np.floor(rgb.astype(np.float64) * np.asarray(rig.gain) + 0.5).clip(0, 255)
    return shaded.astype(np.uint8).reshape(cam.height, cam.width, 3)


def silhouette_mask(scene: SceneSpec, rig: CameraRig) -> np.ndarray:
    """True where the pixel ray hits any occluder (occluders-only cast)."""
    cam = rig.camera
    origins, dirs = _pixel_rays(cam)
    hit = np.zeros(origins.shape[0], dtype=bool)
    for occ in scene.occluders:
        t = _OCCLUDER_TS[occ.kind](occ, origins, dirs)
        hit |= np.isfinite(t)
    return hit.reshape(cam.height, cam.width)


# ---------------------------------------------------------------------------
# ground truth and dataset export


def true_quads(scene: SceneSpec) -> dict[int, FacadeQuad]:
    """Exact facade quads, normals oriented toward the trajectory."""
    out = {}
    for fac in scene.facades:
        n, d = _facade_plane(fac)
        plane = VerticalPlane(float(n[0]), float(n[1]), d)
        if signed_plane_distance(plane, scene.traj_start) < 0:
            plane = plane.flipped()
        out[fac.seg_id] = FacadeQuad(
            e1=fac.p1,
            e2=fac.p2,
            z_bottom=fac.z_bottom,
            z_top=fac.z_max,
            plane=plane,
            msd=0.0,
            lod_flag="detailed" if fac.cren_amp > 0 else "smooth",
        )
    return out


def true_texture(fac: FacadeSpec, grid: OrthoGrid) -> np.ndarray:
    """Rasterize the facade's procedural albedo on an arbitrary ortho grid."""
    world = grid.pixel_world_points().reshape(-1, 3)
    dirv = fac.direction
    s = (world[:, 0] - fac.p1[0]) * dirv[0] + (world[:, 1] - fac.p1[1]) * dirv[1]
    rgb = _texture_albedo(fac, s, world[:, 2])
    return rgb.reshape(grid.n_z, grid.n_s, 3)


def ground_truth(scene: SceneSpec, gsd: float = 0.05) -> GroundTruth:
    quads = true_quads(scene)
    textures = {
        fac.seg_id: true_texture(fac, OrthoGrid.for_quad(quads[fac.seg_id], gsd))
        for fac in scene.facades
    }
    silhouettes = [silhouette_mask(scene, rig) for rig in scene.cameras]
    return GroundTruth(quads=quads, textures=textures, silhouettes=silhouettes)


def simulate_scene_file(scene_path, seed: int, out_dir) -> SceneSpec:
    """Run the full simulation and write a pipeline-ready dataset.

    Layout under out_dir: points.txt, frames.txt, cadastre.txt, cameras.txt,
    cam_###.ppm, and a truth/ directory with quads.txt, labels.txt,
    silhouette_###.pgm and a verbatim copy of the scene file.
    """
    from . import dataset as dio
    from .images import write_mask, write_ppm

    scene = load_scene(scene_path)
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    truth_dir = os.path.join(out_dir, "truth")
    os.makedirs(truth_dir, exist_ok=True)

    points, frame_ids, frames, labels = simulate_laser(scene, rng)
    cadastre = perturb_cadastre(scene, rng)
    dio.write_points(points, frame_ids, os.path.join(out_dir, "points.txt"))
    dio.write_frames(frames, os.path.join(out_dir, "frames.txt"))
    dio.write_cadastre(cadastre, os.path.join(out_dir, "cadastre.txt"))

    image_names = []
    for i, rig in enumerate(scene.cameras):
        name = f"cam_{i:03d}.ppm"
        write_ppm(render_view(scene, rig), os.path.join(out_dir, name))
        image_names.append(name)
    dio.write_cameras(
        [rig.camera for rig in scene.cameras], image_names, os.path.join(out_dir, "cameras.txt")
    )

    dio.write_quads(true_quads(scene), os.path.join(truth_dir, "quads.txt"))
    with open(os.path.join(truth_dir, "labels.txt"), "w", encoding="utf-8") as f:
        for i, lab in enumerate(labels):
            f.write(f"{i} {LABEL_NAMES[int(lab)]}\n")
    for i, rig in enumerate(scene.cameras):
        write_mask(
            silhouette_mask(scene, rig), os.path.join(truth_dir, f"silhouette_{i:03d}.pgm")
        )
    with open(scene_path, "rb") as src, open(
        os.path.join(truth_dir, "scene.txt"), "wb"
    ) as dst:
        dst.write(src.read())
    return scene


def read_labels(path) -> np.ndarray:
    """Parse a labels file back into the integer label array."""
    ids = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            _, name = body.split()
            ids.append(LABEL_IDS[name])
    return np.array(ids, dtype=np.int8)


def perturb_cadastre(scene: SceneSpec, rng: np.random.Generator) -> list[Segment2]:
    """Building-map segments as a surveyor would deliver them: each endpoint
    offset perpendicular to the true facade line by a uniform draw in
    [-amp, +amp]. Along-segment positions are inherited from the map by
    construction, so only the perpendicular component is perturbed (it is
    the component the plane fit can correct)."""
    amp = scene.cadastre_noise
    segments = []
    for fac in scene.facades:
        if amp > 0:
            n, _ = _facade_plane(fac)
            eta = rng.uniform(-amp, amp, size=2)
            p1 = (fac.p1[0] + eta[0] * n[0], fac.p1[1] + eta[0] * n[1])
            p2 = (fac.p2[0] + eta[1] * n[0], fac.p2[1] + eta[1] * n[1])
        else:
            p1, p2 = fac.p1, fac.p2
        segments.append(Segment2(fac.seg_id, p1, p2))
    return segments
