"""Pinhole camera model, ring rigs, and projection/unprojection.

Conventions (OpenCV style):
  - camera coordinates: x right, y down, z forward; camera looks along +z
  - world-to-camera: X_cam = R @ X_world + t
  - pixel centers at integer coordinates, (0, 0) = center of top-left pixel
  - depth = camera-space z, not ray length
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCameraError,
    ConfigError,
    InvalidDepthError,
    ParseError,
    PixelBoundsError,
    ValidationError,
)

_ORTHO_TOL = 1e-6
_Z_EPS = 1e-12


def _check_rotation(rotation: np.ndarray) -> None:
    err = np.abs(rotation @ rotation.T - np.eye(3)).max()
    if err > _ORTHO_TOL:
        raise ValidationError(f"rotation not orthonormal (max residual {err:.3g})")
    if np.linalg.det(rotation) < 0:
        raise ValidationError("rotation has negative determinant (reflection)")


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray  # (3, 3) world-to-camera
    translation: np.ndarray  # (3,) world-to-camera

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValidationError("principal point must lie inside the image")
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        rot.setflags(write=False)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        trans.setflags(write=False)
        _check_rotation(rot)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def forward(self) -> np.ndarray:
        """World-space optical axis (+z of the camera frame)."""
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def with_resolution(self, width: int, height: int) -> "Camera":
        """Same field of view at a different raster size.

        Pixel-center convention: continuous image coordinate u_cont =
        (u + 0.5) / width is resolution-invariant.
        """
        sx = width / self.width
        sy = height / self.height
        return Camera(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=(self.cx + 0.5) * sx - 0.5,
            cy=(self.cy + 0.5) * sy - 0.5,
            width=width,
            height=height,
            rotation=self.rotation,
            translation=self.translation,
        )


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            raise ValidationError("ray direction must be unit length")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t):
        return self.origin + np.multiply.outer(np.asarray(t, dtype=np.float64), self.direction)


@dataclass(frozen=True)
class CameraRig:
    cameras: tuple
    center: np.ndarray

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 2:
            raise ConfigError("a rig needs at least 2 cameras")
        ctr = np.asarray(self.center, dtype=np.float64).reshape(3)
        ctr.setflags(write=False)
        for i, cam in enumerate(cams):
            if float(cam.forward @ (ctr - cam.position)) <= 0:
                raise ValidationError(f"camera {i} does not face the rig center")
        object.__setattr__(self, "cameras", cams)
        object.__setattr__(self, "center", ctr)

    def __len__(self):
        return len(self.cameras)

    def subset(self, indices) -> "CameraRig":
        return CameraRig(tuple(self.cameras[i] for i in indices), self.center)


def project(cam: Camera, point) -> tuple[np.ndarray, float]:
    """Project a world point; returns (pixel, camera-space depth)."""
    pc = cam.world_to_camera(np.asarray(point, dtype=np.float64).reshape(3))
    z = pc[2]
    if z <= _Z_EPS:
        raise BehindCameraError(f"point has camera-space z = {z:.3g}")
    pixel = np.array([cam.fx * pc[0] / z + cam.cx, cam.fy * pc[1] / z + cam.cy])
    return pixel, float(z)


def project_many(cam: Camera, points: np.ndarray):
    """Vectorized projection without the behind-camera check.

    Returns (pixels (N,2), depth (N,), in_front (N,) bool). Pixels for
    points with z <= 0 are unusable and flagged false.
    """
    pc = cam.world_to_camera(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = pc[:, 2]
    in_front = z > _Z_EPS
    safe_z = np.where(in_front, z, 1.0)
    px = cam.fx * pc[:, 0] / safe_z + cam.cx
    py = cam.fy * pc[:, 1] / safe_z + cam.cy
    return np.stack([px, py], axis=1), z, in_front


def unproject(cam: Camera, pixel, depth: float) -> np.ndarray:
    if depth <= 0:
        raise InvalidDepthError(f"depth must be positive, got {depth}")
    u, v = float(pixel[0]), float(pixel[1])
    pc = np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])
    return cam.rotation.T @ (pc - cam.translation)


def unproject_many(cam: Camera, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    depth = np.asarray(depth, dtype=np.float64).reshape(-1)
    pc = np.stack(
        [
            (pixels[:, 0] - cam.cx) / cam.fx * depth,
            (pixels[:, 1] - cam.cy) / cam.fy * depth,
            depth,
        ],
        axis=1,
    )
    return (pc - cam.translation) @ cam.rotation


def pixel_ray(cam: Camera, pixel) -> Ray:
    u, v = float(pixel[0]), float(pixel[1])
    if not (-0.5 <= u <= cam.width - 0.5 and -0.5 <= v <= cam.height - 0.5):
        raise PixelBoundsError(f"pixel ({u}, {v}) outside {cam.width}x{cam.height} raster")
    dir_cam = np.array([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0])
    dir_world = cam.rotation.T @ dir_cam
    return Ray(cam.position, dir_world / np.linalg.norm(dir_world))


def pixel_rays(cam: Camera, pixels: np.ndarray):
    """Vectorized unit ray directions for an (N, 2) pixel array.

    Returns (origin (3,), directions (N,3), dir_z (N,)) where dir_z is the
    camera-frame z component of the unit direction (dz/dt along the ray).
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    dir_cam = np.stack(
        [
            (pixels[:, 0] - cam.cx) / cam.fx,
            (pixels[:, 1] - cam.cy) / cam.fy,
            np.ones(len(pixels)),
        ],
        axis=1,
    )
    norms = np.linalg.norm(dir_cam, axis=1)
    dir_cam /= norms[:, None]
    return cam.position, dir_cam @ cam.rotation, 1.0 / norms


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera (rotation, translation) for a camera at `position`
    looking at `target` with image-down opposite to `up`."""
    position = np.asarray(position, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - position
    zn = np.linalg.norm(z)
    if zn < 1e-12:
        raise ConfigError("camera position coincides with look-at target")
    z = z / zn
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(-up, z)
    xn = np.linalg.norm(x)
    if xn < 1e-9:
        raise ConfigError("view direction parallel to the up vector")
    x = x / xn
    y = np.cross(z, x)
    rotation = np.stack([x, y, z], axis=0)
    return rotation, -rotation @ position


def make_rig(
    n: int,
    radius: float,
    height: float = 0.0,
    center=(0.0, 0.0, 0.0),
    resolution: tuple[int, int] = (512, 512),
    focal: float | None = None,
) -> CameraRig:
    """Evenly spaced ring of n inward-facing cameras.

    Cameras sit on a horizontal circle (world y up) of the given radius at
    `height` above the center plane, ordered by azimuth so list adjacency
    equals angular adjacency.
    """
    if n < 2:
        raise ConfigError(f"a rig needs at least 2 cameras, got {n}")
    if radius <= 0:
        raise ConfigError("rig radius must be positive")
    center = np.asarray(center, dtype=np.float64)
    width, height_px = resolution
    if focal is None:
        focal = 0.8 * min(width, height_px)
    cams = []
    for i in range(n):
        theta = 2.0 * math.pi * i / n
        pos = center + np.array([radius * math.cos(theta), height, radius * math.sin(theta)])
        rotation, translation = look_at(pos, center)
        cams.append(
            Camera(
                fx=focal,
                fy=focal,
                cx=(width - 1) / 2.0,
                cy=(height_px - 1) / 2.0,
                width=width,
                height=height_px,
                rotation=rotation,
                translation=translation,
            )
        )
    return CameraRig(tuple(cams), center)


def orbit_camera(
    rig: CameraRig,
    yaw_deg: float,
    pitch_deg: float,
    dist: float,
    resolution: tuple[int, int] | None = None,
) -> Camera:
    """Virtual camera on a sphere around the rig center (viewer pose)."""
    ref = rig.cameras[0]
    yaw = math.radians(yaw_deg)
    pitch = math.radians(pitch_deg)
    pos = rig.center + dist * np.array(
        [math.cos(pitch) * math.cos(yaw), math.sin(pitch), math.cos(pitch) * math.sin(yaw)]
    )
    rotation, translation = look_at(pos, rig.center)
    cam = Camera(
        fx=ref.fx,
        fy=ref.fy,
        cx=ref.cx,
        cy=ref.cy,
        width=ref.width,
        height=ref.height,
        rotation=rotation,
        translation=translation,
    )
    if resolution is not None:
        cam = cam.with_resolution(*resolution)
    return cam


def _camera_to_dict(cam: Camera) -> dict:
    return {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "width": cam.width,
        "height": cam.height,
        "rotation": [float(v) for v in cam.rotation.reshape(9)],
        "translation": [float(v) for v in cam.translation],
    }


def _camera_from_dict(d: dict, index: int) -> Camera:
    required = ["fx", "fy", "cx", "cy", "width", "height", "rotation", "translation"]
    for key in required:
        if key not in d:
            raise ParseError(f"camera {index}: missing field '{key}'")
    rotation = np.asarray(d["rotation"], dtype=np.float64)
    if rotation.size != 9:
        raise ParseError(f"camera {index}: 'rotation' must hold 9 floats")
    translation = np.asarray(d["translation"], dtype=np.float64)
    if translation.size != 3:
        raise ParseError(f"camera {index}: 'translation' must hold 3 floats")
    return Camera(
        fx=float(d["fx"]),
        fy=float(d["fy"]),
        cx=float(d["cx"]),
        cy=float(d["cy"]),
        width=int(d["width"]),
        height=int(d["height"]),
        rotation=rotation.reshape(3, 3),
        translation=translation,
    )


def save_rig(rig: CameraRig, path) -> None:
    payload = {
        "center": [float(v) for v in rig.center],
        "cameras": [_camera_to_dict(c) for c in rig.cameras],
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_rig(path) -> CameraRig:
    with open(path) as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    if not isinstance(payload, dict) or "cameras" not in payload:
        raise ParseError(f"{path}: missing 'cameras' field")
    if "center" not in payload:
        raise ParseError(f"{path}: missing 'center' field")
    cams = [_camera_from_dict(d, i) for i, d in enumerate(payload["cameras"])]
    return CameraRig(tuple(cams), np.asarray(payload["center"], dtype=np.float64))
