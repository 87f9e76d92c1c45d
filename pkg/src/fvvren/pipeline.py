"""End-to-end frame pipeline: carve, depth, warp, blend, upsample,
normal blend, and normal-driven refinement, plus the evaluation and
camera-ablation harnesses."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import blending, metrics, normals, scenes
from .cameras import Camera, CameraRig, make_rig, orbit_camera
from .depthrender import DepthMap, SampleSpec, render_depth
from .errors import ConfigError, FvvError, PipelineStageError
from .fields import OccupancyField
from .hull import VoxelHull, carve, hull_aabb


@dataclass(frozen=True)
class PipelineConfig:
    scene: scenes.AnalyticScene
    rig: CameraRig
    low_res: int = 256
    hi_res: int = 1024
    k: float | None = None  # sample spacing; None = hull diagonal / 256
    max_samples: int = 512
    tau: float | None = None  # occupancy sharpness; None = 1% scene diagonal
    beta: float | None = None  # blend occlusion softness; None = 2k
    gamma: float = 4.0  # blend view-angle prior
    lam: float = 0.5  # rgb/normal loss mix
    band_radius: int = 2  # boundary band radius at low res
    refine_iters: int = 30
    refine_step: float = 0.5
    refine_damping: float = 1e-2
    grid_divisions: int = 128
    backend: str = "analytic"

    def __post_init__(self):
        if self.hi_res < self.low_res:
            raise ConfigError("hi_res must be >= low_res")
        for name in ("low_res", "hi_res", "max_samples", "grid_divisions"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("k", "tau", "beta"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ConfigError(f"{name} must be positive")


@dataclass
class FrameContext:
    """Immutable per-scene state shared by every rendered frame."""

    config: PipelineConfig
    scene: scenes.AnalyticScene
    rig: CameraRig
    masks: list
    hull: VoxelHull
    field: OccupancyField
    spec: SampleSpec
    source_images_hi: list  # per rig camera, at hi_res
    source_depths: dict = field(default_factory=dict)  # view index -> low-res DepthMap
    source_normals: dict = field(default_factory=dict)
    carve_ms: float = 0.0

    def source_depth(self, i: int) -> DepthMap:
        if i not in self.source_depths:
            cam = self.rig.cameras[i].with_resolution(self.config.low_res, self.config.low_res)
            self.source_depths[i] = render_depth(cam, self.hull, self.field, self.spec)
        return self.source_depths[i]

    def source_normal(self, i: int):
        if i not in self.source_normals:
            self.source_normals[i] = normals.normal_from_depth(self.source_depth(i))
        return self.source_normals[i]


@dataclass
class FrameResult:
    depth_low: DepthMap
    depth_hi: DepthMap
    depth_refined: DepthMap
    normal: normals.NormalMap
    weights_low: blending.BlendWeightMap
    weights_hi: blending.BlendWeightMap
    color: np.ndarray  # (H, W, 3) in [0, 1]
    source_indices: tuple
    timings_ms: dict
    field_evals: int


def _stage(label, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FvvError as e:
        if isinstance(e, PipelineStageError):
            raise
        raise PipelineStageError(label, e) from e


def build_context(config: PipelineConfig) -> FrameContext:
    scene = config.scene
    rig = config.rig
    t0 = time.perf_counter()
    masks = _stage("masks", scenes.gt_masks, scene, rig)
    lo, hi = scene.aabb()
    spacing = float(np.linalg.norm(hi - lo)) / config.grid_divisions
    hull = _stage("carve", carve, rig, masks, (lo, hi), spacing)
    if hull.count == 0:
        raise PipelineStageError("carve", ConfigError("carving produced an empty hull"))
    carve_ms = (time.perf_counter() - t0) * 1000.0

    if config.backend != "analytic":
        raise ConfigError(f"unsupported pipeline backend '{config.backend}'")
    tau = config.tau if config.tau is not None else 0.01 * scene.diagonal()
    field_ = scenes.oracle_field(scene, tau)

    if config.k is None:
        alo, ahi = hull_aabb(hull)
        k = float(np.linalg.norm(ahi - alo)) / 256.0
    else:
        k = config.k
    spec = SampleSpec(k=k, max_samples=config.max_samples)

    src_hi = [
        scenes.gt_render(scene, cam.with_resolution(config.hi_res, config.hi_res)).rgb
        for cam in rig.cameras
    ]
    return FrameContext(
        config=config,
        scene=scene,
        rig=rig,
        masks=masks,
        hull=hull,
        field=field_,
        spec=spec,
        source_images_hi=src_hi,
        carve_ms=carve_ms,
    )


def run_frame(ctx: FrameContext | PipelineConfig, target: Camera) -> FrameResult:
    if isinstance(ctx, PipelineConfig):
        ctx = build_context(ctx)
    cfg = ctx.config
    timings = {"carve": ctx.carve_ms}
    evals0 = ctx.field.eval_count

    i1, i2 = _stage("select_views", blending.select_adjacent_views, ctx.rig, target)
    cam1 = ctx.rig.cameras[i1]
    cam2 = ctx.rig.cameras[i2]

    t0 = time.perf_counter()
    target_low = target.with_resolution(cfg.low_res, cfg.low_res)
    d_low = _stage("depth", render_depth, target_low, ctx.hull, ctx.field, ctx.spec)
    d1 = ctx.source_depth(i1)
    d2 = ctx.source_depth(i2)
    timings["depth"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    cam1_low = cam1.with_resolution(cfg.low_res, cfg.low_res)
    cam2_low = cam2.with_resolution(cfg.low_res, cfg.low_res)
    w1_img = _stage("warp", blending.warp_image, cam1_low, _downsample_rgb(ctx.source_images_hi[i1], cfg.low_res), target_low, d_low)
    w2_img = _stage("warp", blending.warp_image, cam2_low, _downsample_rgb(ctx.source_images_hi[i2], cfg.low_res), target_low, d_low)
    wd1, rp1, v1 = _stage("warp", blending.warp_depth, cam1_low, d1, target_low, d_low)
    wd2, rp2, v2 = _stage("warp", blending.warp_depth, cam2_low, d2, target_low, d_low)
    o1 = blending.occlusion_map(wd1, rp1, v1)
    o2 = blending.occlusion_map(wd2, rp2, v2)
    a1 = blending.view_angle_cosines(cam1, target_low, d_low)
    a2 = blending.view_angle_cosines(cam2, target_low, d_low)
    beta = cfg.beta if cfg.beta is not None else 2.0 * ctx.spec.k
    provider = blending.HeuristicWeightProvider(beta=beta, gamma=cfg.gamma)
    w_low = _stage("blend_weights", blending.blend_weights, w1_img, o1, w2_img, o2, provider, a1, a2)
    timings["warp_blend_low"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    d_hi = _stage(
        "upsample",
        blending.upsample_boundary_aware,
        d_low,
        ctx.hull,
        ctx.field,
        ctx.spec,
        (cfg.hi_res, cfg.hi_res),
        cfg.band_radius,
    )
    w_hi = blending.bilinear_upsample_weights(w_low, (cfg.hi_res, cfg.hi_res))
    timings["upsample"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    cam1_hi = cam1.with_resolution(cfg.hi_res, cfg.hi_res)
    cam2_hi = cam2.with_resolution(cfg.hi_res, cfg.hi_res)
    i1_hi = _stage("warp_hi", blending.warp_image, cam1_hi, ctx.source_images_hi[i1], d_hi.camera, d_hi)
    i2_hi = _stage("warp_hi", blending.warp_image, cam2_hi, ctx.source_images_hi[i2], d_hi.camera, d_hi)
    w_final = _resolve_one_sided(w_hi, i1_hi, i2_hi)
    color = blending.blend(w_final, i1_hi.rgb, i2_hi.rgb)
    timings["blend_hi"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    n1 = _warp_normals(cam1_low, ctx.source_normal(i1), d_hi.camera, d_hi)
    n2 = _warp_normals(cam2_low, ctx.source_normal(i2), d_hi.camera, d_hi)
    n_t = _stage("blend_normals", blending_normals_stage, n1, n2, w_final)
    timings["normal_blend"] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    d_refined = _stage(
        "normal_refine",
        normals.refine_depth_with_normal,
        d_hi,
        n_t,
        cfg.refine_iters,
        cfg.refine_step,
        cfg.refine_damping,
    )
    timings["normal_refine"] = (time.perf_counter() - t0) * 1000.0

    return FrameResult(
        depth_low=d_low,
        depth_hi=d_hi,
        depth_refined=d_refined,
        normal=n_t,
        weights_low=w_low,
        weights_hi=w_hi,
        color=color,
        source_indices=(i1, i2),
        timings_ms=timings,
        field_evals=ctx.field.eval_count - evals0,
    )


def blending_normals_stage(n1, n2, weights):
    return normals.blend_normals(n1, n2, weights)


def _resolve_one_sided(w_hi: blending.BlendWeightMap, i1: blending.WarpedImage, i2: blending.WarpedImage):
    """Pin the upsampled weights at pixels only one hi-res warp covers."""
    w = w_hi.values.copy()
    w[i1.valid & ~i2.valid] = 1.0
    w[i2.valid & ~i1.valid] = 0.0
    return blending.BlendWeightMap(w)


def _warp_normals(src_cam: Camera, src_normals, target_cam: Camera, target_depth: DepthMap):
    """Warp a source-camera-space normal map into the target view and
    rotate it into the target camera frame."""
    stacked = np.concatenate([src_normals.values, src_normals.valid[:, :, None].astype(np.float64)], axis=2)
    vals, valid = blending.warp_raster(src_cam, stacked, target_cam, target_depth)
    n = vals[:, :, :3]
    cover = vals[:, :, 3]
    rot = target_cam.rotation @ src_cam.rotation.T
    n = n @ rot.T
    m = np.linalg.norm(n, axis=2)
    ok = valid & (cover > 0.999) & (m > 0.5)
    out = np.zeros_like(n)
    out[ok] = n[ok] / m[ok, None]
    return normals.NormalMap(out, ok)


def _downsample_rgb(img_hi: np.ndarray, res: int) -> np.ndarray:
    """Box-filter downsample of an (N*res, N*res, 3) image to res^2."""
    h, w, _ = img_hi.shape
    if h == res and w == res:
        return img_hi
    fy, fx = h // res, w // res
    if fy * res == h and fx * res == w:
        return img_hi.reshape(res, fy, res, fx, 3).mean(axis=(1, 3))
    return blending.bilinear_upsample(img_hi, (res, res))


def evaluate_view(ctx: FrameContext, target: Camera, view_id: int) -> metrics.ViewMetrics:
    result = run_frame(ctx, target)
    cfg = ctx.config
    gt = scenes.gt_render(ctx.scene, target.with_resolution(cfg.hi_res, cfg.hi_res))
    fg = gt.mask
    pred_n = result.normal
    both_n = pred_n.valid & fg
    mae_fg = metrics.mae(result.color, gt.rgb, fg)
    mae_full = metrics.mae(result.color, gt.rgb)
    l2_rgb = metrics.l2(result.color, gt.rgb, fg)
    l2_norm = metrics.l2(pred_n.values, gt.normal, both_n) if both_n.any() else 0.0
    return metrics.ViewMetrics(
        view_id=view_id,
        mae_fg=mae_fg,
        mae_full=mae_full,
        l2_rgb=l2_rgb,
        l2_normal=l2_norm,
        combined=metrics.combined_loss(l2_rgb, l2_norm, cfg.lam),
        depth_mae=metrics.depth_mae(result.depth_refined.depth, gt.depth, fg),
        normal_angle_deg=(
            metrics.normal_mean_angle_deg(pred_n.values, gt.normal, both_n) if both_n.any() else 0.0
        ),
    )


def default_targets(rig: CameraRig, count: int, pitch_deg: float = 12.0, resolution=None):
    """Deterministic ring of novel viewpoints between the rig cameras."""
    radius = float(np.linalg.norm(rig.cameras[0].position - rig.center))
    cams = []
    for i in range(count):
        yaw = 360.0 * (i + 0.37) / count
        cams.append(orbit_camera(rig, yaw, pitch_deg, radius, resolution))
    return cams


def evaluate_targets(ctx: FrameContext, targets: list) -> metrics.EvalReport:
    views = [evaluate_view(ctx, cam, i) for i, cam in enumerate(targets)]
    return metrics.EvalReport(
        views=views,
        metadata={
            "n_cameras": len(ctx.rig.cameras),
            "low_res": ctx.config.low_res,
            "hi_res": ctx.config.hi_res,
            "k": ctx.spec.k,
            "n_targets": len(targets),
        },
    )


def ablate_cameras(config: PipelineConfig, subset_sizes, n_targets: int = 30) -> list:
    """Full pipeline per evenly spaced camera subset; one report each."""
    reports = []
    base = config.rig
    targets = default_targets(base, n_targets)
    for size in subset_sizes:
        idx = metrics.evenly_spaced_subset(len(base.cameras), size)
        sub_rig = base.subset(idx)
        ctx = build_context(replace(config, rig=sub_rig))
        report = evaluate_targets(ctx, targets)
        report.metadata["camera_indices"] = idx
        reports.append(report)
    return reports
