"""Quantitative evaluation: MAE on the [0, 255] scale, L2 terms, the
normal-consistency residual, and the camera-count ablation harness."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, UndefinedMetricError


def mae(img: np.ndarray, ref: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean absolute error over masked pixels and channels, [0, 255] scale.

    Inputs are float rasters in [0, 1]; the result is scaled by 255 to
    match the conventional reporting range.
    """
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ConfigError(f"image shapes differ: {img.shape} vs {ref.shape}")
    if mask is None:
        mask = np.ones(img.shape[:2], dtype=bool)
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise UndefinedMetricError("MAE over an empty mask is undefined")
    diff = np.abs(img[mask] - ref[mask])
    return float(diff.mean() * 255.0)


def l2(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean squared error over the mask (per pixel, summed over channels)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ConfigError(f"shapes differ: {pred.shape} vs {gt.shape}")
    if mask is None:
        mask = np.ones(pred.shape[:2], dtype=bool)
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise UndefinedMetricError("L2 over an empty mask is undefined")
    diff = pred[mask] - gt[mask]
    if diff.ndim == 1:
        return float(np.mean(diff * diff))
    return float(np.mean(np.sum(diff * diff, axis=-1)))


l2_rgb = l2
l2_normal = l2


def combined_loss(l_rgb: float, l_normal: float, lam: float = 0.5) -> float:
    return lam * l_rgb + (1.0 - lam) * l_normal


def eq_normal_residual(depth_map, n_t, mask: np.ndarray | None = None) -> float:
    """Mean squared normal discrepancy of a depth map against a target
    normal map (the depth-refinement objective's data term)."""
    from .normals import normal_from_depth

    n = normal_from_depth(depth_map)
    both = n.valid & n_t.valid
    if mask is not None:
        both &= np.asarray(mask).astype(bool)
    if not both.any():
        raise UndefinedMetricError("normal residual over an empty mask is undefined")
    diff = n.values[both] - n_t.values[both]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def depth_mae(pred_depth: np.ndarray, gt_depth: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask).astype(bool)
    both = mask & np.isfinite(pred_depth) & np.isfinite(gt_depth)
    if not both.any():
        raise UndefinedMetricError("depth MAE over an empty mask is undefined")
    return float(np.mean(np.abs(pred_depth[both] - gt_depth[both])))


def normal_mean_angle_deg(pred, gt, mask: np.ndarray) -> float:
    mask = np.asarray(mask).astype(bool)
    dots = np.clip(np.einsum("ijk,ijk->ij", pred, gt), -1.0, 1.0)
    if not mask.any():
        raise UndefinedMetricError("angular error over an empty mask is undefined")
    return float(np.degrees(np.arccos(dots[mask])).mean())


@dataclass
class ViewMetrics:
    view_id: int
    mae_fg: float
    mae_full: float
    l2_rgb: float
    l2_normal: float
    combined: float
    depth_mae: float
    normal_angle_deg: float


@dataclass
class EvalReport:
    views: list
    metadata: dict = field(default_factory=dict)

    def aggregate(self, name: str) -> float:
        return float(np.mean([getattr(v, name) for v in self.views]))

    def to_json(self, path=None):
        payload = {
            "metadata": self.metadata,
            "views": [asdict(v) for v in self.views],
            "aggregate": {
                name: self.aggregate(name)
                for name in (
                    "mae_fg",
                    "mae_full",
                    "l2_rgb",
                    "l2_normal",
                    "combined",
                    "depth_mae",
                    "normal_angle_deg",
                )
            },
        }
        if path is None:
            return payload
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


_CSV_COLUMNS = [
    "view_id",
    "n_cameras",
    "mae_fg",
    "mae_full",
    "l2_rgb",
    "l2_normal",
    "combined",
    "depth_mae",
    "normal_angle_deg",
]


def reports_to_csv(reports: list, path) -> None:
    """One row per (report, view); reports carry n_cameras metadata."""
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for report in reports:
            n_cams = report.metadata.get("n_cameras", "")
            for view in report.views:
                row = {k: getattr(view, k) for k in _CSV_COLUMNS if hasattr(view, k)}
                row["n_cameras"] = n_cams
                writer.writerow(row)


def evenly_spaced_subset(n_total: int, size: int) -> list:
    if size < 2:
        raise ConfigError("camera subsets need at least 2 cameras")
    if size > n_total:
        raise ConfigError(f"subset size {size} exceeds rig size {n_total}")
    idx = sorted({int(round(i * n_total / size)) % n_total for i in range(size)})
    if len(idx) != size:  # rounding collision, fall back to a linspace
        idx = sorted(set(np.linspace(0, n_total, size, endpoint=False).astype(int)))
    return idx
