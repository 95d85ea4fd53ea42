"""Dataset file formats, parsing, and pipeline configuration.

All dataset files are plain whitespace-separated text with '#' comments and
dot decimal separators (locale independent):

* points:   ``x y z frame_id``
* frames:   ``frame_id sensor_x sensor_y sensor_z``
* cadastre: ``segment_id x1 y1 x2 y2``
* cameras:  ``cam_id image_path fx fy cx cy width height r11 r12 r13 r21
  r22 r23 r31 r32 r33 tx ty tz`` (rotation camera-to-world, image path
  relative to the cameras file)

Images are binary PPM; masks PGM (see images module).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .geometry import (
    FacadeQuad,
    GeometryError,
    PinholeCamera,
    Point3,
    RigidPose,
    Segment2,
    VerticalPlane,
)
from .images import read_ppm

__all__ = [
    "DataFormatError",
    "PointRecord",
    "LaserFrame",
    "CameraView",
    "Dataset",
    "PipelineConfig",
    "load_config",
    "load_points",
    "load_frames",
    "load_cadastre",
    "load_cameras",
    "load_dataset",
    "write_points",
    "write_frames",
    "write_cadastre",
    "write_cameras",
    "write_quads",
    "read_quads",
]


class DataFormatError(ValueError):
    """A dataset file is malformed; the message carries file and line."""

    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class PointRecord:
    """One georeferenced laser return tied to the sweep that produced it."""

    point: Point3
    frame_id: int


@dataclass(frozen=True)
class LaserFrame:
    """One vertical sweep: its id and the sensor world position."""

    frame_id: int
    sensor_pos: Point3


@dataclass
class CameraView:
    camera: PinholeCamera
    image_path: str
    image: np.ndarray  # (H, W, 3) uint8


@dataclass
class Dataset:
    """A fully cross-referenced input set.

    Points are stored as arrays (coordinates plus parallel frame ids) rather
    than per-record objects; `record(i)` materializes a single PointRecord.
    """

    points: np.ndarray  # (N, 3) float64
    frame_ids: np.ndarray  # (N,) int64
    frames: dict[int, LaserFrame]
    cadastre: list[Segment2]
    cameras: list[CameraView]

    def record(self, i: int) -> PointRecord:
        x, y, z = self.points[i]
        return PointRecord(Point3(float(x), float(y), float(z)), int(self.frame_ids[i]))

    def sensor_positions(self, frame_ids=None) -> np.ndarray:
        """Sensor world positions for the given frame ids (default: all)."""
        if frame_ids is None:
            frame_ids = sorted(self.frames)
        return np.array([self.frames[int(f)].sensor_pos.as_array() for f in frame_ids])


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable pipeline parameters; defaults target street scenes."""

    grid_step: float = 0.05  # accumulation cell size, m
    neighborhood: float = 1.0  # half-width of the per-segment search band, m
    min_cluster_pts: int = 500
    h_vehicle: float = 2.5  # sensor height over the road, m
    h_curb: float = 0.15  # standard border pavement height, m
    tau_msd: float = 0.25  # top-roughness threshold, m^2
    occ_d_min: float = 0.3  # occluder band, distance from plane, m
    occ_d_max: float = 15.0
    occ_ground_eps: float = 0.2  # ground-return rejection above z_bottom, m
    occ_extent_margin: float = 0.5  # along-facade slack, m
    occ_min_pts: int = 30
    dilate_r: int = 50  # mask dilation disc radius, px
    erode_r: int = 20  # mask erosion disc radius, px
    feather_w: int = 10  # soft-mask ramp width, px
    ortho_gsd: float = 0.05  # ortho texture resolution, m/px
    view_min_frac: float = 0.05  # min projected-quad / image area
    cube_half_edge: float = 0.10  # 3D point-dilation cube half edge, m
    cube_dilation_enabled: bool = False

    def validate(self) -> "PipelineConfig":
        positive = [
            "grid_step",
            "neighborhood",
            "h_vehicle",
            "h_curb",
            "occ_d_min",
            "occ_d_max",
            "occ_extent_margin",
            "ortho_gsd",
            "cube_half_edge",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config {name} must be > 0, got {getattr(self, name)}")
        if self.tau_msd < 0:
            raise ValueError(f"config tau_msd must be >= 0, got {self.tau_msd}")
        if self.occ_ground_eps < 0:
            raise ValueError(f"config occ_ground_eps must be >= 0, got {self.occ_ground_eps}")
        if self.min_cluster_pts < 1 or self.occ_min_pts < 0:
            raise ValueError("config point-count thresholds out of range")
        if self.dilate_r < 1 or self.erode_r < 1 or self.feather_w < 0:
            raise ValueError("config kernel radii out of range")
        if self.erode_r >= self.dilate_r:
            raise ValueError(
                f"config erode_r ({self.erode_r}) must be smaller than dilate_r ({self.dilate_r})"
            )
        if self.occ_d_min >= self.occ_d_max:
            raise ValueError("config occ_d_min must be smaller than occ_d_max")
        if not (0 < self.view_min_frac <= 1):
            raise ValueError(f"config view_min_frac must be in (0, 1], got {self.view_min_frac}")
        return self

    def snapshot(self) -> list[tuple[str, str]]:
        """(key, formatted value) pairs in declaration order, for manifests."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                out.append((f.name, "true" if v else "false"))
            elif isinstance(v, float):
                out.append((f.name, repr(v)))
            else:
                out.append((f.name, str(v)))
        return out


_CONFIG_FIELDS = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def parse_config_value(name: str, raw: str):
    kind = _CONFIG_FIELDS[name]
    if kind == "bool":
        return _parse_bool(raw)
    if kind == "int":
        return int(raw)
    return float(raw)


def load_config(path) -> PipelineConfig:
    """Parse a ``key = value`` config file; unknown keys are an error,
    missing keys take the defaults."""
    overrides = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise DataFormatError(path, lineno, f"expected 'key = value', got {body!r}")
            key, _, raw = body.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _CONFIG_FIELDS:
                raise DataFormatError(path, lineno, f"unknown config key {key!r}")
            try:
                overrides[key] = parse_config_value(key, raw)
            except ValueError:
                raise DataFormatError(path, lineno, f"bad value for {key}: {raw!r}") from None
    cfg = replace(PipelineConfig(), **overrides)
    try:
        return cfg.validate()
    except ValueError as exc:
        raise DataFormatError(path, None, str(exc)) from None


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            body = line.split("#", 1)[0].strip()
            if body:
                yield lineno, body


def load_points(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (coords (N, 3), frame_ids (N,), source line numbers (N,))."""
    coords, frame_ids, linenos = [], [], []
    for lineno, body in _data_lines(path):
        tok = body.split()
        if len(tok) != 4:
            raise DataFormatError(path, lineno, f"expected 'x y z frame_id', got {len(tok)} fields")
        try:
            xyz = [float(t) for t in tok[:3]]
            fid = int(tok[3])
        except ValueError:
            raise DataFormatError(path, lineno, f"non-numeric point record: {body!r}") from None
        if not all(math.isfinite(c) for c in xyz):
            raise DataFormatError(path, lineno, "non-finite coordinates")
        if fid < 0:
            raise DataFormatError(path, lineno, f"negative frame id {fid}")
        coords.append(xyz)
        frame_ids.append(fid)
        linenos.append(lineno)
    if not coords:
        raise DataFormatError(path, None, "no point records")
    return (
        np.array(coords, dtype=np.float64),
        np.array(frame_ids, dtype=np.int64),
        np.array(linenos, dtype=np.int64),
    )


def load_frames(path) -> dict[int, LaserFrame]:
    frames: dict[int, LaserFrame] = {}
    for lineno, body in _data_lines(path):
        tok = body.split()
        if len(tok) != 4:
            raise DataFormatError(path, lineno, "expected 'frame_id sx sy sz'")
        try:
            fid = int(tok[0])
            pos = Point3(float(tok[1]), float(tok[2]), float(tok[3]))
        except (ValueError, GeometryError):
            raise DataFormatError(path, lineno, f"bad frame record: {body!r}") from None
        if fid in frames:
            raise DataFormatError(path, lineno, f"duplicate frame id {fid}")
        frames[fid] = LaserFrame(fid, pos)
    return frames


def load_cadastre(path) -> list[Segment2]:
    segments: list[Segment2] = []
    seen = set()
    for lineno, body in _data_lines(path):
        tok = body.split()
        if len(tok) != 5:
            raise DataFormatError(path, lineno, "expected 'segment_id x1 y1 x2 y2'")
        try:
            sid = int(tok[0])
            seg = Segment2(sid, (float(tok[1]), float(tok[2])), (float(tok[3]), float(tok[4])))
        except (ValueError, GeometryError) as exc:
            raise DataFormatError(path, lineno, f"bad segment record: {exc}") from None
        if sid in seen:
            raise DataFormatError(path, lineno, f"duplicate segment id {sid}")
        seen.add(sid)
        segments.append(seg)
    return segments


def load_cameras(path) -> list[CameraView]:
    """Parse camera poses and eagerly load their images.

    Rotation orthonormality is checked here (tolerance 1e-6) so that corrupt
    poses fail loudly instead of being silently re-orthonormalized.
    """
    base = os.path.dirname(os.path.abspath(path))
    views: list[CameraView] = []
    for lineno, body in _data_lines(path):
        tok = body.split()
        if len(tok) != 20:
            raise DataFormatError(path, lineno, f"expected 20 camera fields, got {len(tok)}")
        try:
            fx, fy, cx, cy = (float(t) for t in tok[2:6])
            width, height = int(tok[6]), int(tok[7])
            r = np.array([float(t) for t in tok[8:17]], dtype=float).reshape(3, 3)
            t_vec = np.array([float(t) for t in tok[17:20]], dtype=float)
        except ValueError:
            raise DataFormatError(path, lineno, f"non-numeric camera record: {body!r}") from None
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-6:
            raise DataFormatError(path, lineno, "camera rotation is not orthonormal")
        try:
            cam = PinholeCamera(fx, fy, cx, cy, width, height, RigidPose(r, t_vec))
        except GeometryError as exc:
            raise DataFormatError(path, lineno, f"bad camera: {exc}") from None
        image_path = tok[1] if os.path.isabs(tok[1]) else os.path.join(base, tok[1])
        try:
            image = read_ppm(image_path)
        except (OSError, ValueError) as exc:
            raise DataFormatError(path, lineno, f"cannot load image {tok[1]}: {exc}") from None
        if image.shape[0] != height or image.shape[1] != width:
            raise DataFormatError(
                path,
                lineno,
                f"image {tok[1]} is {image.shape[1]}x{image.shape[0]}, camera says {width}x{height}",
            )
        views.append(CameraView(cam, image_path, image))
    return views


def load_dataset(points_path, frames_path, cadastre_path, cameras_path) -> Dataset:
    """Load and cross-reference all four dataset files."""
    points, frame_ids, linenos = load_points(points_path)
    frames = load_frames(frames_path)
    known = np.array(sorted(frames), dtype=np.int64)
    present = np.isin(frame_ids, known)
    if not present.all():
        bad = int(np.argmin(present))
        raise DataFormatError(
            points_path,
            int(linenos[bad]),
            f"point references unknown frame id {int(frame_ids[bad])}",
        )
    cadastre = load_cadastre(cadastre_path)
    cameras = load_cameras(cameras_path)
    return Dataset(points, frame_ids, frames, cadastre, cameras)


# ---------------------------------------------------------------------------
# writers (used by the simulator and the pipeline exports)


def write_points(points: np.ndarray, frame_ids: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for (x, y, z), fid in zip(points, frame_ids):
            f.write(f"{x:.6f} {y:.6f} {z:.6f} {int(fid)}\n")


def write_frames(frames: dict[int, LaserFrame] | list[LaserFrame], path) -> None:
    if isinstance(frames, dict):
        frames = [frames[k] for k in sorted(frames)]
    with open(path, "w", encoding="utf-8") as f:
        for fr in frames:
            p = fr.sensor_pos
            f.write(f"{fr.frame_id} {p.x:.6f} {p.y:.6f} {p.z:.6f}\n")


def write_cadastre(segments: list[Segment2], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seg in segments:
            f.write(
                f"{seg.id} {seg.p1[0]:.6f} {seg.p1[1]:.6f} {seg.p2[0]:.6f} {seg.p2[1]:.6f}\n"
            )


def write_cameras(cameras: list[PinholeCamera], image_names: list[str], path) -> None:
    """Write camera lines with full-precision (repr) floats so parsed poses
    round-trip exactly and stay orthonormal."""
    with open(path, "w", encoding="utf-8") as f:
        for i, (cam, name) in enumerate(zip(cameras, image_names)):
            r = cam.pose.rotation.reshape(-1)
            t = cam.pose.translation
            fields = (
                [str(i), name]
                + [repr(float(v)) for v in (cam.fx, cam.fy, cam.cx, cam.cy)]
                + [str(cam.width), str(cam.height)]
                + [repr(float(v)) for v in r]
                + [repr(float(v)) for v in t]
            )
            f.write(" ".join(fields) + "\n")


def write_quads(quads: dict[int, FacadeQuad], path) -> None:
    """Facade quads as text: one line per facade,
    ``segment_id e1x e1y e2x e2y z_bottom z_top msd lod_flag``."""
    with open(path, "w", encoding="utf-8") as f:
        for sid in sorted(quads):
            q = quads[sid]
            f.write(
                f"{sid} {q.e1[0]:.6f} {q.e1[1]:.6f} {q.e2[0]:.6f} {q.e2[1]:.6f} "
                f"{q.z_bottom:.6f} {q.z_top:.6f} {q.msd:.9f} {q.lod_flag}\n"
            )


def read_quads(path) -> dict[int, FacadeQuad]:
    """Parse a quads file. The stored format carries no normal orientation;
    planes come back with the left normal of e1->e2 (re-orient against the
    sensor trajectory when sidedness matters)."""
    quads: dict[int, FacadeQuad] = {}
    for lineno, body in _data_lines(path):
        tok = body.split()
        if len(tok) != 9:
            raise DataFormatError(path, lineno, f"expected 9 quad fields, got {len(tok)}")
        try:
            sid = int(tok[0])
            e1 = (float(tok[1]), float(tok[2]))
            e2 = (float(tok[3]), float(tok[4]))
            zb, zt, msd = float(tok[5]), float(tok[6]), float(tok[7])
        except ValueError:
            raise DataFormatError(path, lineno, f"non-numeric quad record: {body!r}") from None
        if sid in quads:
            raise DataFormatError(path, lineno, f"duplicate quad id {sid}")
        dx, dy = e2[0] - e1[0], e2[1] - e1[1]
        norm = math.hypot(dx, dy)
        if norm <= 1e-6:
            raise DataFormatError(path, lineno, "degenerate quad endpoints")
        nx, ny = -dy / norm, dx / norm
        plane = VerticalPlane(nx, ny, nx * e1[0] + ny * e1[1])
        try:
            quads[sid] = FacadeQuad(e1, e2, zb, zt, plane, msd, tok[8])
        except GeometryError as exc:
            raise DataFormatError(path, lineno, str(exc)) from None
    return quads
