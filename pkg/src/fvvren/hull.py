"""Shape-from-silhouette voxel carving and ray/hull interval queries.

The hull is a coarse sampling prior: a voxel survives iff its center
projects into the foreground of every mask that sees it. Before the
test, each mask is dilated by the projected half-diagonal of a voxel
(plus rounding slack), so a voxel that contains any surface cannot be
carved even when its center projects just outside the silhouette. This
keeps the visual-hull superset property at finite mask resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .cameras import Camera, CameraRig, Ray, project_many
from .errors import ConfigError, EmptyHullError, ValidationError

DEFAULT_GRID_DIVISIONS = 128


@dataclass(frozen=True)
class SilhouetteMask:
    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]


@dataclass(frozen=True)
class VoxelHull:
    origin: np.ndarray  # (3,) world position of the grid corner
    spacing: float
    dims: tuple  # (nx, ny, nz)
    occupancy: np.ndarray  # (nx, ny, nz) bool

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValidationError("voxel spacing must be positive")
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims):
            raise ValidationError("grid dims must each be >= 1")
        occ = np.ascontiguousarray(self.occupancy).astype(bool)
        if occ.shape != dims:
            raise ValidationError(f"occupancy shape {occ.shape} != dims {dims}")
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        origin.setflags(write=False)
        occ.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "occupancy", occ)

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())

    def voxel_centers(self) -> np.ndarray:
        """(N, 3) centers of occupied voxels."""
        idx = np.argwhere(self.occupancy)
        return self.origin + (idx + 0.5) * self.spacing

    def save(self, path) -> None:
        np.savez_compressed(
            path,
            origin=self.origin,
            spacing=np.float64(self.spacing),
            dims=np.asarray(self.dims, dtype=np.int64),
            occupancy=np.packbits(self.occupancy.reshape(-1)),
        )

    @classmethod
    def load(cls, path) -> "VoxelHull":
        data = np.load(path)
        dims = tuple(int(d) for d in data["dims"])
        n = dims[0] * dims[1] * dims[2]
        occ = np.unpackbits(data["occupancy"])[:n].reshape(dims).astype(bool)
        return cls(data["origin"], float(data["spacing"]), dims, occ)


def default_spacing(bounds_lo, bounds_hi) -> float:
    diag = float(np.linalg.norm(np.asarray(bounds_hi) - np.asarray(bounds_lo)))
    return diag / DEFAULT_GRID_DIVISIONS


def carve(
    rig: CameraRig,
    masks: list,
    bounds: tuple,
    spacing: float | None = None,
) -> VoxelHull:
    """Voxel carving: intersect the silhouette cones of all cameras.

    A voxel center projecting outside a camera's image (or behind it) is
    treated as inside that view's silhouette: a view that does not see a
    voxel cannot carve it.
    """
    if len(masks) != len(rig.cameras):
        raise ConfigError(f"{len(masks)} masks for {len(rig.cameras)} cameras")
    lo = np.asarray(bounds[0], dtype=np.float64)
    hi = np.asarray(bounds[1], dtype=np.float64)
    if np.any(hi <= lo):
        raise ConfigError("carving bounds are degenerate")
    if spacing is None:
        spacing = default_spacing(lo, hi)

    dims = tuple(int(np.ceil((hi[a] - lo[a]) / spacing)) for a in range(3))
    grid = np.stack(
        np.meshgrid(
            lo[0] + (np.arange(dims[0]) + 0.5) * spacing,
            lo[1] + (np.arange(dims[1]) + 0.5) * spacing,
            lo[2] + (np.arange(dims[2]) + 0.5) * spacing,
            indexing="ij",
        ),
        axis=-1,
    ).reshape(-1, 3)

    occ = np.ones(len(grid), dtype=bool)
    for cam, mask in zip(rig.cameras, masks):
        if (mask.height, mask.width) != (cam.height, cam.width):
            raise ConfigError(
                f"mask {mask.width}x{mask.height} does not match camera {cam.width}x{cam.height}"
            )
        pixels, z, in_front = project_many(cam, grid)
        # conservative dilation: half a voxel diagonal projected at the
        # nearest voxel depth, plus half a pixel for center rounding
        z_min = float(z[in_front].min()) if in_front.any() else spacing
        radius = int(np.ceil(0.5 + 0.5 * np.sqrt(3.0) * spacing * max(cam.fx, cam.fy) / max(z_min, 1e-12)))
        fg = ndimage.binary_dilation(
            mask.bits, structure=np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
        )
        u = np.rint(pixels[:, 0]).astype(np.int64)
        v = np.rint(pixels[:, 1]).astype(np.int64)
        seen = in_front & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
        inside = np.ones(len(grid), dtype=bool)
        inside[seen] = fg[v[seen], u[seen]]
        occ &= inside

    return VoxelHull(lo, float(spacing), dims, occ.reshape(dims))


def ray_hull_interval(hull: VoxelHull, ray: Ray):
    """(t_near, t_far) covering every occupied voxel on the ray, or None."""
    hit, t_near, t_far = kernels.ray_grid_intervals(
        ray.origin[None, :],
        ray.direction[None, :],
        hull.origin,
        hull.spacing,
        hull.dims,
        hull.occupancy.astype(np.uint8),
    )
    if not hit[0]:
        return None
    return float(t_near[0]), float(t_far[0])


def ray_hull_intervals(hull: VoxelHull, origins: np.ndarray, dirs: np.ndarray):
    """Batched interval query; returns (hit, t_near, t_far) arrays."""
    return kernels.ray_grid_intervals(
        origins, dirs, hull.origin, hull.spacing, hull.dims, hull.occupancy.astype(np.uint8)
    )


def hull_aabb(hull: VoxelHull) -> tuple[np.ndarray, np.ndarray]:
    """Tight box over occupied voxels, padded by one voxel per face."""
    idx = np.argwhere(hull.occupancy)
    if len(idx) == 0:
        raise EmptyHullError("hull has no occupied voxels")
    lo = hull.origin + (idx.min(axis=0) - 1) * hull.spacing
    hi = hull.origin + (idx.max(axis=0) + 2) * hull.spacing
    return lo, hi
