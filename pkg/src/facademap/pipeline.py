"""End-to-end pipeline orchestration: load -> accumulate -> extract ->
fit -> occlusion -> masks -> textures -> exports, plus run evaluation.

A run writes, under its output directory:

* ``quads.txt``                      all facade quads
* ``facade_<id>/occluders.txt``      detected occluding points
* ``facade_<id>/mask_cam###.pgm``    hard occlusion mask per retained view
* ``facade_<id>/soft_cam###.pgm``    feathered mask per retained view
* ``facade_<id>/ortho.ppm``          mosaiced facade texture
* ``facade_<id>/hole.pgm``           pixels no view could fill
* ``facade_<id>/meta.txt``           ortho grid geometry and view list
* ``manifest.txt``                   inputs, config snapshot, counts

Everything on disk is deterministic for fixed inputs, regardless of the
thread count: all paths inside the manifest are relative to the output
directory and stage timings stay in memory (surfaced via --verbose only).
On a stage error every file already written is removed, the error names the
stage, and nothing partial survives.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dataset as dio
from .accumulation import build_accumulation_map, split_hyper_points
from .clusters import FacadeCluster, extract_facade_clusters
from .dataset import Dataset, PipelineConfig
from .facades import build_facade_quad, orient_quad_to_street
from .geometry import FacadeQuad
from .images import read_pgm, read_ppm, write_mask, write_ppm, write_soft_mask
from .masks import occlusion_masks
from .metrics import format_metrics_table, planimetric_deviation, texture_error
from .occlusion import OccluderSet, band_membership, cube_dilate, detect_occluding_points
from .texturing import (
    OrthoFrame,
    OrthoGrid,
    export_hole_map,
    gray_world_balance,
    mosaic,
    rectify_view,
    select_views,
)

__all__ = ["PipelineError", "FacadeArtifacts", "RunManifest", "run_pipeline", "evaluate_run"]


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class FacadeArtifacts:
    """Everything the pipeline derived for one facade."""

    segment_id: int
    cluster_size: int
    quad: FacadeQuad
    occluders: OccluderSet
    views: list[tuple[int, float]]  # (camera index, view score)
    masks: dict[int, tuple[np.ndarray, np.ndarray]]  # view -> (hard, soft)
    grid: OrthoGrid
    frame: OrthoFrame

    @property
    def hole_fraction(self) -> float:
        return self.frame.hole_fraction


@dataclass
class RunManifest:
    """What a run consumed and produced. Timings are diagnostic only and are
    deliberately not written to disk (outputs must be byte-reproducible)."""

    points_path: str
    frames_path: str
    cadastre_path: str
    cameras_path: str
    out_dir: str
    config: PipelineConfig
    threads: int
    point_count: int = 0
    hyper_count: int = 0
    surface_count: int = 0
    cluster_count: int = 0
    facades: list[FacadeArtifacts] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


def _relative_to_out(path, out_dir) -> str:
    try:
        return os.path.relpath(os.path.abspath(path), os.path.abspath(out_dir))
    except ValueError:  # different drive
        return os.path.abspath(path)


def _process_facade(
    data: Dataset, cluster: FacadeCluster, segment, cfg: PipelineConfig
) -> FacadeArtifacts:
    quad = build_facade_quad(data, cluster, segment, cfg)
    occ = detect_occluding_points(data.points, quad, cfg, segment_id=cluster.segment_id)
    if cfg.cube_dilation_enabled and occ.count:
        occ = cube_dilate(occ, cfg.cube_half_edge)
    cameras = [view.camera for view in data.cameras]
    views = select_views(cameras, quad, cfg.view_min_frac)
    grid = OrthoGrid.for_quad(quad, cfg.ortho_gsd)
    layers = []
    masks: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for idx, score in views:
        cam = cameras[idx]
        hard, soft = occlusion_masks(cam, occ.points, cfg)
        masks[idx] = (hard, soft)
        layers.append(
            rectify_view(
                cam, data.cameras[idx].image, hard, soft, quad, cfg.ortho_gsd, score, idx, grid
            )
        )
    frame = gray_world_balance(mosaic(grid, layers))
    return FacadeArtifacts(
        segment_id=cluster.segment_id,
        cluster_size=cluster.count,
        quad=quad,
        occluders=occ,
        views=views,
        masks=masks,
        grid=grid,
        frame=frame,
    )


def _write_occluders(occ: OccluderSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for idx, (x, y, z), synth in zip(occ.point_indices, occ.points, occ.synthetic):
            flag = "cube" if synth else "measured"
            f.write(f"{int(idx)} {x:.6f} {y:.6f} {z:.6f} {flag}\n")


def _read_occluder_indices(path) -> np.ndarray:
    idx = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            body = line.strip()
            if not body:
                continue
            tok = body.split()
            if tok[4] == "measured":
                idx.append(int(tok[0]))
    return np.array(idx, dtype=np.int64)


def _write_meta(art: FacadeArtifacts, path) -> None:
    g = art.grid
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"segment_id = {art.segment_id}\n")
        f.write(f"e1 = {g.e1[0]!r} {g.e1[1]!r}\n")
        f.write(f"e2 = {g.e2[0]!r} {g.e2[1]!r}\n")
        f.write(f"z_bottom = {g.z_bottom!r}\n")
        f.write(f"gsd = {g.gsd!r}\n")
        f.write(f"n_s = {g.n_s}\n")
        f.write(f"n_z = {g.n_z}\n")
        f.write(f"views = {' '.join(str(i) for i, _ in art.views)}\n")
        f.write(f"view_scores = {' '.join(repr(s) for _, s in art.views)}\n")
        f.write(f"hole_fraction = {art.hole_fraction!r}\n")


def _read_meta(path) -> tuple[int, OrthoGrid]:
    vals: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            key, _, raw = line.partition("=")
            vals[key.strip()] = raw.strip()
    e1 = tuple(float(t) for t in vals["e1"].split())
    e2 = tuple(float(t) for t in vals["e2"].split())
    grid = OrthoGrid(
        e1=e1,
        e2=e2,
        z_bottom=float(vals["z_bottom"]),
        gsd=float(vals["gsd"]),
        n_s=int(vals["n_s"]),
        n_z=int(vals["n_z"]),
    )
    return int(vals["segment_id"]), grid


def _write_manifest(manifest: RunManifest, path) -> None:
    out = manifest.out_dir
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"inputs.points = {_relative_to_out(manifest.points_path, out)}\n")
        f.write(f"inputs.frames = {_relative_to_out(manifest.frames_path, out)}\n")
        f.write(f"inputs.cadastre = {_relative_to_out(manifest.cadastre_path, out)}\n")
        f.write(f"inputs.cameras = {_relative_to_out(manifest.cameras_path, out)}\n")
        for key, value in manifest.config.snapshot():
            f.write(f"config.{key} = {value}\n")
        f.write(f"counts.points = {manifest.point_count}\n")
        f.write(f"counts.hyper_points = {manifest.hyper_count}\n")
        f.write(f"counts.surface_points = {manifest.surface_count}\n")
        f.write(f"counts.clusters = {manifest.cluster_count}\n")
        for art in manifest.facades:
            sid = art.segment_id
            f.write(f"facade.{sid}.dir = facade_{sid:04d}\n")
            f.write(f"facade.{sid}.points = {art.cluster_size}\n")
            f.write(f"facade.{sid}.occluders = {art.occluders.count}\n")
            f.write(f"facade.{sid}.views = {' '.join(str(i) for i, _ in art.views)}\n")
            f.write(f"facade.{sid}.hole_fraction = {art.hole_fraction!r}\n")
        f.write("status = ok\n")


def _read_manifest(path) -> dict[str, str]:
    vals: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            body = line.strip()
            if not body or "=" not in body:
                continue
            key, _, raw = body.partition("=")
            vals[key.strip()] = raw.strip()
    return vals


def run_pipeline(
    points_path,
    frames_path,
    cadastre_path,
    cameras_path,
    cfg: PipelineConfig,
    out_dir,
    threads: int | None = None,
    verbose: bool = False,
) -> RunManifest:
    """Execute the full pipeline and export everything under out_dir."""
    cfg.validate()
    threads = max(1, threads if threads else (os.cpu_count() or 1))
    manifest = RunManifest(
        points_path=str(points_path),
        frames_path=str(frames_path),
        cadastre_path=str(cadastre_path),
        cameras_path=str(cameras_path),
        out_dir=str(out_dir),
        config=cfg,
        threads=threads,
    )
    written: list[str] = []

    def _run_stage(stage, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except PipelineError:
            raise
        except Exception as exc:
            for p in reversed(written):
                try:
                    os.remove(p)
                except OSError:
                    pass
            raise PipelineError(stage, exc) from exc
        manifest.timings[stage] = time.perf_counter() - start
        if verbose:
            print(f"[{stage}] {manifest.timings[stage]:.3f}s", flush=True)
        return result

    data = _run_stage(
        "load", lambda: dio.load_dataset(points_path, frames_path, cadastre_path, cameras_path)
    )
    manifest.point_count = int(data.points.shape[0])

    grid = _run_stage("accumulation", lambda: build_accumulation_map(data.points, cfg.grid_step))
    hyper, surface = _run_stage("segment", lambda: split_hyper_points(grid))
    manifest.hyper_count = int(hyper.size)
    manifest.surface_count = int(surface.size)

    clusters = _run_stage(
        "extract", lambda: extract_facade_clusters(hyper, data.points, data.cadastre, cfg)
    )
    manifest.cluster_count = len(clusters)
    segments = {seg.id: seg for seg in data.cadastre}

    def _facade_stage():
        if threads == 1 or len(clusters) <= 1:
            return [_process_facade(data, c, segments[c.segment_id], cfg) for c in clusters]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(
                pool.map(lambda c: _process_facade(data, c, segments[c.segment_id], cfg), clusters)
            )

    manifest.facades = _run_stage("facades", _facade_stage)

    def _export_stage():
        os.makedirs(out_dir, exist_ok=True)
        quads = {art.segment_id: art.quad for art in manifest.facades}
        qpath = os.path.join(out_dir, "quads.txt")
        dio.write_quads(quads, qpath)
        written.append(qpath)
        for art in manifest.facades:
            fdir = os.path.join(out_dir, f"facade_{art.segment_id:04d}")
            os.makedirs(fdir, exist_ok=True)

            def _emit(name, writer, *args):
                p = os.path.join(fdir, name)
                writer(*args, p)
                written.append(p)

            _emit("occluders.txt", _write_occluders, art.occluders)
            for idx, (hard, soft) in sorted(art.masks.items()):
                _emit(f"mask_cam{idx:03d}.pgm", write_mask, hard)
                _emit(f"soft_cam{idx:03d}.pgm", write_soft_mask, soft)
            _emit("ortho.ppm", write_ppm, art.frame.rgb)
            _emit("hole.pgm", write_mask, export_hole_map(art.frame))
            _emit("meta.txt", _write_meta, art)
        mpath = os.path.join(out_dir, "manifest.txt")
        _write_manifest(manifest, mpath)
        written.append(mpath)

    _run_stage("export", _export_stage)
    return manifest


def evaluate_run(run_dir, truth_dir) -> str:
    """Compare a run against simulator truth; returns the metrics table."""
    from .simulator import LABEL_IDS, load_scene, read_labels, true_texture

    manifest = _read_manifest(os.path.join(run_dir, "manifest.txt"))
    cfg_fields = {}
    for key, raw in manifest.items():
        if key.startswith("config."):
            name = key[len("config.") :]
            cfg_fields[name] = dio.parse_config_value(name, raw)
    cfg = PipelineConfig(**cfg_fields).validate()

    def _input(name):
        p = manifest[f"inputs.{name}"]
        return p if os.path.isabs(p) else os.path.join(run_dir, p)

    data = dio.load_dataset(
        _input("points"), _input("frames"), _input("cadastre"), _input("cameras")
    )
    est = dio.read_quads(os.path.join(run_dir, "quads.txt"))
    truth = dio.read_quads(os.path.join(truth_dir, "quads.txt"))
    deviation = planimetric_deviation(est, truth)

    scene = load_scene(os.path.join(truth_dir, "scene.txt"))
    facade_specs = {fac.seg_id: fac for fac in scene.facades}
    labels = read_labels(os.path.join(truth_dir, "labels.txt"))
    if labels.shape[0] != data.points.shape[0]:
        raise ValueError(
            f"labels cover {labels.shape[0]} points but the dataset has {data.points.shape[0]}"
        )

    sensors = data.sensor_positions()
    occluder_id = LABEL_IDS["occluder"]
    texture_rows = []
    hits = 0
    truth_total = 0
    det_total = 0
    for sid in sorted(est):
        quad = orient_quad_to_street(est[sid], sensors)
        fdir = os.path.join(run_dir, f"facade_{sid:04d}")
        det_idx = _read_occluder_indices(os.path.join(fdir, "occluders.txt"))
        band_truth = np.flatnonzero(
            (labels == occluder_id) & band_membership(data.points, quad, cfg)
        )
        hits += int(np.isin(det_idx, band_truth).sum())
        truth_total += int(band_truth.size)
        det_total += int(det_idx.size)

        _, grid = _read_meta(os.path.join(fdir, "meta.txt"))
        rgb = read_ppm(os.path.join(fdir, "ortho.ppm"))
        holes = read_pgm(os.path.join(fdir, "hole.pgm")) != 0
        frame = OrthoFrame(
            grid, rgb, ~holes, np.where(holes, np.int32(-1), np.int32(0)).astype(np.int32)
        )
        if sid in facade_specs:
            mae, hole_frac = texture_error(frame, true_texture(facade_specs[sid], grid))
            texture_rows.append((sid, mae, hole_frac))

    recall = hits / truth_total if truth_total else None
    precision = hits / det_total if det_total else None
    return format_metrics_table(deviation, texture_rows, recall, precision)
