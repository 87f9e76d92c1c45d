"""Analytic SDF scenes with procedural albedo: the ground-truth oracle.

Every stage of the pipeline is verified against closed-form renders of
these scenes, so the renderer here favors exactness over speed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cameras import Camera, CameraRig, pixel_rays
from .errors import ConfigError, InputError, ParseError

BACKGROUND_DEPTH = np.inf

_TRACE_MAX_STEPS = 512


@dataclass(frozen=True)
class Albedo:
    kind: str = "solid"  # solid | checker | stripes
    color: tuple = (0.8, 0.8, 0.8)
    color2: tuple = (0.15, 0.15, 0.15)
    scale: float = 8.0  # cells per scene unit (checker/stripes)
    axis: int = 0  # stripes direction

    def sample(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        c1 = np.asarray(self.color, dtype=np.float64)
        c2 = np.asarray(self.color2, dtype=np.float64)
        if self.kind == "solid":
            return np.broadcast_to(c1, (len(points), 3)).copy()
        if self.kind == "checker":
            parity = np.floor(points * self.scale).sum(axis=1).astype(np.int64) % 2
        elif self.kind == "stripes":
            parity = np.floor(points[:, self.axis] * self.scale).astype(np.int64) % 2
        else:
            raise ConfigError(f"unknown albedo kind '{self.kind}'")
        return np.where(parity[:, None] == 0, c1, c2)


@dataclass(frozen=True)
class Primitive:
    shape: str  # sphere | box | capsule
    albedo: Albedo = field(default_factory=Albedo)
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    size: tuple = (1.0, 1.0, 1.0)  # box full extents
    p0: tuple = (0.0, 0.0, 0.0)  # capsule endpoints
    p1: tuple = (0.0, 1.0, 0.0)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if self.shape == "sphere":
            return np.linalg.norm(p - np.asarray(self.center), axis=1) - self.radius
        if self.shape == "box":
            half = np.asarray(self.size, dtype=np.float64) / 2.0
            q = np.abs(p - np.asarray(self.center)) - half
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
            inside = np.minimum(q.max(axis=1), 0.0)
            return outside + inside
        if self.shape == "capsule":
            a = np.asarray(self.p0, dtype=np.float64)
            b = np.asarray(self.p1, dtype=np.float64)
            ab = b - a
            denom = float(ab @ ab)
            t = np.clip((p - a) @ ab / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(p))
            return np.linalg.norm(p - a - t[:, None] * ab, axis=1) - self.radius
        raise ConfigError(f"unknown primitive shape '{self.shape}'")

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        if self.shape == "sphere":
            c = np.asarray(self.center, dtype=np.float64)
            return c - self.radius, c + self.radius
        if self.shape == "box":
            c = np.asarray(self.center, dtype=np.float64)
            half = np.asarray(self.size, dtype=np.float64) / 2.0
            return c - half, c + half
        if self.shape == "capsule":
            a = np.asarray(self.p0, dtype=np.float64)
            b = np.asarray(self.p1, dtype=np.float64)
            return np.minimum(a, b) - self.radius, np.maximum(a, b) + self.radius
        raise ConfigError(f"unknown primitive shape '{self.shape}'")


@dataclass(frozen=True)
class AnalyticScene:
    primitives: tuple

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not prims:
            raise ConfigError("scene needs at least one primitive")
        object.__setattr__(self, "primitives", prims)

    def aabb(self, pad: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(p.aabb() for p in self.primitives))
        lo = np.min(los, axis=0)
        hi = np.max(his, axis=0)
        extent = hi - lo
        return lo - pad * extent, hi + pad * extent

    def diagonal(self) -> float:
        lo, hi = self.aabb(pad=0.0)
        return float(np.linalg.norm(hi - lo))


@dataclass(frozen=True)
class GroundTruthRender:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) camera-space z, inf on background
    normal: np.ndarray  # (H, W, 3) camera-space unit normals
    mask: np.ndarray  # (H, W) bool, equals isfinite(depth)


def scene_sdf(scene: AnalyticScene, points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise InputError("scene_sdf requires finite query points")
    single = points.ndim == 1
    p = points.reshape(-1, 3)
    d = np.min([prim.sdf(p) for prim in scene.primitives], axis=0)
    return float(d[0]) if single else d


def scene_normal(scene: AnalyticScene, points, h: float = 1e-5) -> np.ndarray:
    """Outward world-space normal: central-difference SDF gradient."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    grad = np.empty_like(p)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        grad[:, axis] = scene_sdf(scene, p + e) - scene_sdf(scene, p - e)
    norms = np.linalg.norm(grad, axis=1, keepdims=True)
    return grad / np.maximum(norms, 1e-300)


def _sphere_hits(prim: Primitive, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Smallest positive ray parameter per ray, inf on miss (closed form)."""
    oc = origin - np.asarray(prim.center, dtype=np.float64)
    b = dirs @ oc
    c = float(oc @ oc) - prim.radius**2
    disc = b * b - c
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > 1e-12, t0, np.where(t1 > 1e-12, t1, np.inf))
    return np.where(hit, t, np.inf)


def _trace_hits(scene: AnalyticScene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Sphere tracing to |sdf| < 1e-7 * diag; inf on miss."""
    eps = 1e-7 * scene.diagonal()
    lo, hi = scene.aabb()
    t_far = _ray_aabb_far(origin, dirs, lo, hi)
    n = len(dirs)
    t = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    hit = np.zeros(n, dtype=bool)
    for _ in range(_TRACE_MAX_STEPS):
        active = ~done
        if not active.any():
            break
        pts = origin + t[active, None] * dirs[active]
        d = scene_sdf(scene, pts)
        converged = np.abs(d) < eps
        idx = np.flatnonzero(active)
        hit[idx[converged]] = True
        done[idx[converged]] = True
        t[idx] += d
        escaped = t[idx] > t_far[idx]
        done[idx[escaped]] = True
    return np.where(hit, t, np.inf)


def _ray_aabb_far(origin, dirs, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        ta = (lo - origin) * inv
        tb = (hi - origin) * inv
    tmax = np.nanmax(np.maximum(ta, tb), axis=1)
    return np.maximum(tmax, 0.0)


def gt_render(scene: AnalyticScene, cam: Camera, method: str = "auto") -> GroundTruthRender:
    """Exact render: analytic ray-sphere where possible, sphere tracing else."""
    all_spheres = all(p.shape == "sphere" for p in scene.primitives)
    if method == "auto":
        method = "analytic" if all_spheres else "trace"
    if method == "analytic" and not all_spheres:
        raise ConfigError("analytic render only supports all-sphere scenes")

    w, h = cam.width, cam.height
    uu, vv = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    pixels = np.stack([uu.ravel(), vv.ravel()], axis=1)
    origin, dirs, dir_z = pixel_rays(cam, pixels)

    if method == "analytic":
        per_prim = np.stack([_sphere_hits(p, origin, dirs) for p in scene.primitives])
        prim_idx = np.argmin(per_prim, axis=0)
        t = per_prim[prim_idx, np.arange(per_prim.shape[1])]
    else:
        t = _trace_hits(scene, origin, dirs)
        prim_idx = None

    hit = np.isfinite(t)
    depth = np.where(hit, t * dir_z, BACKGROUND_DEPTH)
    points = origin + np.where(hit, t, 0.0)[:, None] * dirs

    rgb = np.zeros((len(dirs), 3))
    normal_w = np.zeros((len(dirs), 3))
    if hit.any():
        hp = points[hit]
        if method == "analytic":
            pi = prim_idx[hit]
            nrm = np.zeros((len(hp), 3))
            col = np.zeros((len(hp), 3))
            for k, prim in enumerate(scene.primitives):
                sel = pi == k
                if sel.any():
                    nrm[sel] = (hp[sel] - np.asarray(prim.center)) / prim.radius
                    col[sel] = prim.albedo.sample(hp[sel])
            normal_w[hit] = nrm
            rgb[hit] = col
        else:
            normal_w[hit] = scene_normal(scene, hp)
            rgb[hit] = _albedo_at(scene, hp)
    normal_c = normal_w @ cam.rotation.T
    # orient toward the camera (visible side)
    flip = np.einsum("ij,ij->i", normal_c, dirs @ cam.rotation.T) > 0
    normal_c[flip] *= -1.0

    return GroundTruthRender(
        rgb=np.where(hit[:, None], rgb, 0.0).reshape(h, w, 3),
        depth=depth.reshape(h, w),
        normal=np.where(hit[:, None], normal_c, 0.0).reshape(h, w, 3),
        mask=hit.reshape(h, w),
    )


def _albedo_at(scene: AnalyticScene, points: np.ndarray) -> np.ndarray:
    """Albedo of the nearest primitive at each (surface) point."""
    dists = np.stack([np.abs(p.sdf(points)) for p in scene.primitives])
    nearest = np.argmin(dists, axis=0)
    out = np.zeros((len(points), 3))
    for k, prim in enumerate(scene.primitives):
        sel = nearest == k
        if sel.any():
            out[sel] = prim.albedo.sample(points[sel])
    return out


def gt_masks(scene: AnalyticScene, rig: CameraRig) -> list:
    """Per-camera silhouette masks: the gt_render foreground raster."""
    from .hull import SilhouetteMask

    return [SilhouetteMask(gt_render(scene, cam).mask) for cam in rig.cameras]


def oracle_field(scene: AnalyticScene, tau: float | None = None):
    from .fields import AnalyticOccupancyField

    if tau is None:
        tau = 0.01 * scene.diagonal()
    return AnalyticOccupancyField(scene, tau)


def sphere_checker_scene() -> AnalyticScene:
    """Canonical test scene: unit sphere with high-frequency checker albedo."""
    return AnalyticScene(
        (
            Primitive(
                shape="sphere",
                center=(0.0, 0.0, 0.0),
                radius=1.0,
                albedo=Albedo(kind="checker", scale=8.0, color=(0.9, 0.85, 0.2), color2=(0.15, 0.1, 0.5)),
            ),
        )
    )


def two_sphere_scene() -> AnalyticScene:
    """Occlusion fixture: a small near sphere in front of a large far one."""
    return AnalyticScene(
        (
            Primitive(
                shape="sphere",
                center=(0.0, 0.0, 0.0),
                radius=1.0,
                albedo=Albedo(kind="checker", scale=8.0),
            ),
            Primitive(
                shape="sphere",
                center=(1.35, 0.0, 0.0),
                radius=0.25,
                albedo=Albedo(kind="solid", color=(0.9, 0.2, 0.2)),
            ),
        )
    )


def save_scene(scene: AnalyticScene, path) -> None:
    prims = []
    for p in scene.primitives:
        d = {"shape": p.shape, "albedo": {
            "kind": p.albedo.kind,
            "color": list(p.albedo.color),
            "color2": list(p.albedo.color2),
            "scale": p.albedo.scale,
            "axis": p.albedo.axis,
        }}
        if p.shape == "sphere":
            d.update(center=list(p.center), radius=p.radius)
        elif p.shape == "box":
            d.update(center=list(p.center), size=list(p.size))
        else:
            d.update(p0=list(p.p0), p1=list(p.p1), radius=p.radius)
        prims.append(d)
    with open(path, "w") as f:
        json.dump({"primitives": prims}, f, indent=2)
        f.write("\n")


def load_scene(path) -> AnalyticScene:
    with open(path) as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(payload, dict) or "primitives" not in payload:
        raise ParseError(f"{path}: missing 'primitives' field")
    prims = []
    for i, d in enumerate(payload["primitives"]):
        if "shape" not in d:
            raise ParseError(f"{path}: primitive {i}: missing 'shape'")
        shape = d["shape"]
        if shape not in ("sphere", "box", "capsule"):
            raise ParseError(f"{path}: primitive {i}: unknown shape '{shape}'")
        alb = d.get("albedo", {})
        albedo = Albedo(
            kind=alb.get("kind", "solid"),
            color=tuple(alb.get("color", (0.8, 0.8, 0.8))),
            color2=tuple(alb.get("color2", (0.15, 0.15, 0.15))),
            scale=float(alb.get("scale", 8.0)),
            axis=int(alb.get("axis", 0)),
        )
        kwargs = {"shape": shape, "albedo": albedo}
        try:
            if shape == "sphere":
                kwargs["center"] = tuple(d["center"])
                kwargs["radius"] = float(d["radius"])
            elif shape == "box":
                kwargs["center"] = tuple(d["center"])
                kwargs["size"] = tuple(d["size"])
            else:
                kwargs["p0"] = tuple(d["p0"])
                kwargs["p1"] = tuple(d["p1"])
                kwargs["radius"] = float(d["radius"])
        except KeyError as e:
            raise ParseError(f"{path}: primitive {i}: missing field {e}") from e
        prims.append(Primitive(**kwargs))
    return AnalyticScene(tuple(prims))
