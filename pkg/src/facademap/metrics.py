"""Evaluation metrics: planimetric endpoint deviation, texture fidelity,
and occluder detection quality against simulator labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PipelineConfig
from .geometry import FacadeQuad
from .occlusion import OccluderSet, band_membership
from .texturing import OrthoFrame

__all__ = [
    "DeviationStats",
    "planimetric_deviation",
    "texture_error",
    "occlusion_recall",
    "format_metrics_table",
]


@dataclass(frozen=True)
class DeviationStats:
    max: float
    min: float
    mean: float
    per_facade: tuple[tuple[int, float], ...]  # (segment_id, deviation) sorted by id


def planimetric_deviation(
    est: dict[int, FacadeQuad], truth: dict[int, FacadeQuad]
) -> DeviationStats:
    """Per-facade deviation: mean of the two endpoint-to-endpoint planimetric
    distances, endpoints matched by their stored (e1, e2) order; stats over
    all facades. Unmatched segment ids are an error."""
    missing = sorted(set(truth) - set(est))
    extra = sorted(set(est) - set(truth))
    if missing or extra:
        raise ValueError(
            f"quad sets do not match: missing from estimate {missing}, unmatched {extra}"
        )
    if not est:
        raise ValueError("no facades to compare")
    per = []
    for sid in sorted(est):
        a, b = est[sid], truth[sid]
        d1 = np.hypot(a.e1[0] - b.e1[0], a.e1[1] - b.e1[1])
        d2 = np.hypot(a.e2[0] - b.e2[0], a.e2[1] - b.e2[1])
        per.append((sid, float((d1 + d2) / 2.0)))
    devs = np.array([d for _, d in per])
    return DeviationStats(
        max=float(devs.max()),
        min=float(devs.min()),
        mean=float(devs.mean()),
        per_facade=tuple(per),
    )


def texture_error(frame: OrthoFrame, truth: np.ndarray) -> tuple[float | None, float]:
    """(mean absolute RGB error over valid pixels, hole fraction).

    The truth raster must live on the same grid. MAE is None for an all-hole
    frame.
    """
    truth = np.asarray(truth)
    if truth.shape != frame.rgb.shape:
        raise ValueError(f"grid mismatch: frame {frame.rgb.shape} vs truth {truth.shape}")
    hole_frac = frame.hole_fraction
    if not frame.valid.any():
        return None, hole_frac
    diff = np.abs(
        frame.rgb[frame.valid].astype(np.float64) - truth[frame.valid].astype(np.float64)
    )
    return float(diff.mean()), hole_frac


def occlusion_recall(
    detected: OccluderSet,
    labels: np.ndarray,
    occluder_label,
    points: np.ndarray,
    quad: FacadeQuad,
    cfg: PipelineConfig,
) -> tuple[float | None, float | None]:
    """(recall, precision) of detected occluders against labeled truth.

    Truth is restricted to measured points carrying the occluder label that
    fall inside the facade's band extent; detections are the set's measured
    points. Undefined ratios (empty truth / empty detection) come back None.
    """
    labels = np.asarray(labels)
    truth = np.flatnonzero((labels == occluder_label) & band_membership(points, quad, cfg))
    det = detected.point_indices[~detected.synthetic]
    det = det[det >= 0]
    n_hit = np.isin(det, truth).sum()
    recall = float(n_hit / truth.size) if truth.size else None
    precision = float(n_hit / det.size) if det.size else None
    return recall, precision


def _fmt(value, unit: str = "") -> str:
    if value is None:
        return "n/a"
    return f"{value:.4f}{unit}" if unit else f"{value:.4f}"


def format_metrics_table(
    deviation: DeviationStats | None,
    texture_rows: list[tuple[int, float | None, float]],
    recall: float | None,
    precision: float | None,
) -> str:
    """Human-readable metrics block; deterministic formatting."""
    lines = ["Facade delimitations", "Deviation in planimetry          in (x, y)"]
    if deviation is None:
        lines.append("  (no matched facades)")
    else:
        lines.append(f"Maximum deviation                {deviation.max:.4f}m")
        lines.append(f"Minimum deviation                {deviation.min:.4f}m")
        lines.append(f"Average deviation                {deviation.mean:.4f}m")
        for sid, dev in deviation.per_facade:
            lines.append(f"  facade {sid:<6d}                 {dev:.4f}m")
    lines.append("")
    lines.append("Texture recovery")
    if texture_rows:
        maes = [m for _, m, _ in texture_rows if m is not None]
        holes = [h for _, _, h in texture_rows]
        for sid, mae, hole in texture_rows:
            lines.append(
                f"  facade {sid:<6d}                 mae {_fmt(mae)}  holes {hole:.4f}"
            )
        lines.append(f"Mean absolute error              {_fmt(np.mean(maes) if maes else None)}")
        lines.append(f"Mean hole fraction               {np.mean(holes):.4f}")
    else:
        lines.append("  (no textures)")
    lines.append("")
    lines.append("Occluding point detection")
    lines.append(f"Recall                           {_fmt(recall)}")
    lines.append(f"Precision                        {_fmt(precision)}")
    return "\n".join(lines) + "\n"
