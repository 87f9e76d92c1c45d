"""Two-view blending stage: depth-guided warping, occlusion analysis,
blend weights, compositing, and boundary-aware upsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cameras import Camera, CameraRig, project_many, unproject_many
from .depthrender import BACKGROUND, DepthMap, SampleSpec, render_depth
from .errors import ConfigError, ShapeError, ValidationError
from .fields import bilinear_sample, logistic


@dataclass(frozen=True)
class WarpedImage:
    rgb: np.ndarray  # (H, W, 3), zeros where invalid
    valid: np.ndarray  # (H, W) bool

    def __post_init__(self):
        rgb = np.ascontiguousarray(self.rgb, dtype=np.float64)
        valid = np.ascontiguousarray(self.valid).astype(bool)
        if rgb.shape[:2] != valid.shape:
            raise ShapeError("warped image and validity rasters disagree")
        rgb = rgb.copy()
        rgb[~valid] = 0.0
        rgb.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "valid", valid)


@dataclass(frozen=True)
class OcclusionMap:
    values: np.ndarray  # (H, W) warped-source minus reprojected-target depth
    valid: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        valid = np.ascontiguousarray(self.valid).astype(bool)
        if np.any(~np.isfinite(vals[valid])):
            raise ValidationError("occlusion values must be finite where valid")
        vals.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", valid)


@dataclass(frozen=True)
class BlendWeightMap:
    values: np.ndarray  # (H, W) in [0, 1]

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValidationError("blend weights must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def select_adjacent_views(rig: CameraRig, target: Camera) -> tuple[int, int]:
    """Indices of the two rig cameras angularly closest to the target.

    Closeness = angle between the camera-to-rig-center view vectors.
    Ties break toward the lower index.
    """
    t_dir = rig.center - target.position
    t_dir = t_dir / np.linalg.norm(t_dir)
    angles = []
    for cam in rig.cameras:
        v = rig.center - cam.position
        v = v / np.linalg.norm(v)
        angles.append(math.acos(min(1.0, max(-1.0, float(v @ t_dir)))))
    order = sorted(range(len(angles)), key=lambda i: (angles[i], i))
    i1, i2 = sorted(order[:2])
    return i1, i2


def _warp_core(src: Camera, target: Camera, target_depth: DepthMap):
    """Unproject target foreground pixels, project into the source view.

    Returns (src_pixels (N,2), z_src (N,), usable (N,), fg_index) where
    usable already accounts for behind-camera and out-of-bounds cases.
    """
    if target_depth.camera is not target and target_depth.depth.shape != (target.height, target.width):
        raise ConfigError("target depth raster does not belong to the target camera")
    fg = target_depth.mask
    vs, us = np.nonzero(fg)
    pixels = np.stack([us.astype(np.float64), vs.astype(np.float64)], axis=1)
    points = unproject_many(target, pixels, target_depth.depth[fg])
    src_pixels, z_src, in_front = project_many(src, points)
    w, h = src.width, src.height
    in_bounds = (
        (src_pixels[:, 0] >= 0)
        & (src_pixels[:, 0] <= w - 1)
        & (src_pixels[:, 1] >= 0)
        & (src_pixels[:, 1] <= h - 1)
    )
    return src_pixels, z_src, in_front & in_bounds, (vs, us)


def warp_raster(src: Camera, src_raster: np.ndarray, target: Camera, target_depth: DepthMap):
    """Resample an (H_src, W_src[, C]) raster into the target view via the
    target depth. Returns (values, valid) at target resolution."""
    src_pixels, _, usable, (vs, us) = _warp_core(src, target, target_depth)
    vals, _ = bilinear_sample(src_raster, src_pixels)
    shape = (target.height, target.width) + (() if vals.ndim == 1 else (vals.shape[1],))
    out = np.zeros(shape)
    valid = np.zeros((target.height, target.width), dtype=bool)
    out[vs, us] = np.where(usable[..., None] if vals.ndim > 1 else usable, vals, 0.0)
    valid[vs, us] = usable
    return out, valid


def warp_image(src: Camera, src_rgb: np.ndarray, target: Camera, target_depth: DepthMap) -> WarpedImage:
    rgb, valid = warp_raster(src, np.asarray(src_rgb, dtype=np.float64), target, target_depth)
    return WarpedImage(rgb, valid)


def warp_depth(src: Camera, src_depth: DepthMap, target: Camera, target_depth: DepthMap):
    """Warp the source depth map into the target view.

    Returns (warped, reprojected, valid): `warped` resamples the source
    camera's own depth values; `reprojected` is the depth the target
    surface point has in the source camera. Where the source actually
    sees that point the two agree.
    """
    src_pixels, z_src, usable, (vs, us) = _warp_core(src, target, target_depth)
    sampled, _ = bilinear_sample(np.where(src_depth.mask, src_depth.depth, np.nan), src_pixels)
    usable = usable & np.isfinite(sampled)
    h, w = target.height, target.width
    warped = np.full((h, w), BACKGROUND)
    reproj = np.full((h, w), BACKGROUND)
    valid = np.zeros((h, w), dtype=bool)
    warped[vs, us] = np.where(usable, sampled, BACKGROUND)
    reproj[vs, us] = np.where(usable, z_src, BACKGROUND)
    valid[vs, us] = usable
    return warped, reproj, valid


def occlusion_map(warped_src_depth: np.ndarray, reprojected_target_depth: np.ndarray, valid: np.ndarray) -> OcclusionMap:
    """O = warped source depth minus reprojected target depth.

    O near zero: the source saw this very surface point. Large |O|
    (strongly negative: a nearer occluder in the source) flags pixels
    whose warped texture is unreliable.
    """
    vals = np.zeros_like(warped_src_depth)
    vals[valid] = warped_src_depth[valid] - reprojected_target_depth[valid]
    return OcclusionMap(vals, valid)


@dataclass(frozen=True)
class HeuristicWeightProvider:
    """Stand-in for the trained blending network.

    Scores each view by occlusion disagreement |O_i| and by how well its
    viewing direction matches the target ray; a logistic squashes the
    difference of scores into a convex weight.
    """

    beta: float  # occlusion softness (scene units), ~2x sample spacing
    gamma: float = 4.0  # view-direction prior strength

    def __call__(self, o1: OcclusionMap, o2: OcclusionMap, a1=None, a2=None) -> BlendWeightMap:
        score = np.zeros(o1.values.shape)
        both = o1.valid & o2.valid
        score[both] = (np.abs(o2.values[both]) - np.abs(o1.values[both])) / self.beta
        if a1 is not None and a2 is not None:
            score[both] += self.gamma * (np.asarray(a1)[both] - np.asarray(a2)[both])
        w = logistic(score)
        w[o1.valid & ~o2.valid] = 1.0
        w[o2.valid & ~o1.valid] = 0.0
        w[~o1.valid & ~o2.valid] = 0.5
        return BlendWeightMap(w)


def view_angle_cosines(src: Camera, target: Camera, target_depth: DepthMap) -> np.ndarray:
    """cos(angle) between the target ray and the source ray at each
    foreground surface point; 0 on background."""
    fg = target_depth.mask
    vs, us = np.nonzero(fg)
    pixels = np.stack([us.astype(np.float64), vs.astype(np.float64)], axis=1)
    points = unproject_many(target, pixels, target_depth.depth[fg])
    d_t = points - target.position
    d_s = points - src.position
    d_t /= np.linalg.norm(d_t, axis=1, keepdims=True)
    d_s /= np.linalg.norm(d_s, axis=1, keepdims=True)
    out = np.zeros(fg.shape)
    out[vs, us] = np.einsum("ij,ij->i", d_t, d_s)
    return out


def blend_weights(i1: WarpedImage, o1: OcclusionMap, i2: WarpedImage, o2: OcclusionMap, provider, a1=None, a2=None) -> BlendWeightMap:
    del i1, i2  # the heuristic provider scores occlusion + angles only
    return provider(o1, o2, a1, a2)


def blend(weights: BlendWeightMap, i1: np.ndarray, i2: np.ndarray) -> np.ndarray:
    """Convex per-pixel composite W*I1 + (1-W)*I2."""
    w = weights.values if isinstance(weights, BlendWeightMap) else np.asarray(weights)
    i1 = np.asarray(i1, dtype=np.float64)
    i2 = np.asarray(i2, dtype=np.float64)
    if i1.ndim == 3:
        w = w[:, :, None]
    return w * i1 + (1.0 - w) * i2


def _upsample_coords(lo_shape, hi_shape):
    h_lo, w_lo = lo_shape
    h_hi, w_hi = hi_shape
    sx = w_lo / w_hi
    sy = h_lo / h_hi
    u = (np.arange(w_hi) + 0.5) * sx - 0.5
    v = (np.arange(h_hi) + 0.5) * sy - 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


def bilinear_upsample(raster: np.ndarray, hi_shape: tuple[int, int]) -> np.ndarray:
    """Plain bilinear upsample (pixel centers at integers, edge clamp)."""
    raster = np.asarray(raster, dtype=np.float64)
    pix = _upsample_coords(raster.shape[:2], hi_shape)
    vals, _ = bilinear_sample(raster, pix)
    shape = hi_shape + (() if raster.ndim == 2 else (raster.shape[2],))
    return vals.reshape(shape)


def bilinear_upsample_weights(weights: BlendWeightMap, hi_shape) -> BlendWeightMap:
    return BlendWeightMap(np.clip(bilinear_upsample(weights.values, hi_shape), 0.0, 1.0))


def bilinear_upsample_depth(d_low: DepthMap, hi_cam: Camera) -> DepthMap:
    """Bilinear depth upsample; any contribution from a background
    neighbor makes the output pixel background."""
    hi_shape = (hi_cam.height, hi_cam.width)
    pix = _upsample_coords(d_low.depth.shape, hi_shape)
    finite = np.where(d_low.mask, d_low.depth, np.nan)
    vals, _ = bilinear_sample(finite, pix)
    out = np.where(np.isfinite(vals), vals, BACKGROUND).reshape(hi_shape)
    return DepthMap(out, hi_cam)


def boundary_band(mask: np.ndarray, radius: int) -> np.ndarray:
    """Morphological gradient of the mask with a square structuring
    element of the given radius, dilated by the same radius."""
    if radius <= 0:
        return np.zeros_like(mask, dtype=bool)
    selem = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    grad = ndimage.binary_dilation(mask, selem) & ~ndimage.binary_erosion(mask, selem)
    return ndimage.binary_dilation(grad, selem)


def upsample_boundary_aware(
    d_low: DepthMap,
    hull,
    field,
    spec: SampleSpec,
    hi_res: tuple[int, int],
    radius: int = 2,
) -> DepthMap:
    """Bilinear upsample with the silhouette band re-rendered at full
    resolution; interior pixels keep the bilinear values bit-exactly."""
    w_hi, h_hi = hi_res
    if w_hi < d_low.camera.width or h_hi < d_low.camera.height:
        raise ConfigError("upsample target must be at least the source resolution")
    hi_cam = d_low.camera.with_resolution(w_hi, h_hi)
    naive = bilinear_upsample_depth(d_low, hi_cam)
    radius_hi = int(round(radius * w_hi / d_low.camera.width))
    band = boundary_band(naive.mask, radius_hi)
    if not band.any():
        return naive
    rerendered = render_depth(hi_cam, hull, field, spec, pixel_mask=band)
    out = np.where(band, rerendered.depth, naive.depth)
    return DepthMap(out, hi_cam)
