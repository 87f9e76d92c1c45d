"""Normals from depth, normal blending, and normal-driven depth
refinement by direct minimization of the normal-consistency residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cameras import Camera
from .depthrender import BACKGROUND, DepthMap
from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class NormalMap:
    values: np.ndarray  # (H, W, 3) camera-space unit normals, zeros invalid
    valid: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        valid = np.ascontiguousarray(self.valid).astype(bool)
        if vals.ndim != 3 or vals.shape[2] != 3 or vals.shape[:2] != valid.shape:
            raise ShapeError("normal map must be (H, W, 3) with matching validity")
        norms = np.linalg.norm(vals[valid], axis=1)
        if norms.size and np.abs(norms - 1.0).max() > 1e-6:
            raise ValidationError("valid normals must be unit length")
        vals = vals.copy()
        vals[~valid] = 0.0
        vals.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", valid)


def _pixel_dirs(cam: Camera) -> np.ndarray:
    """(H, W, 3) camera-frame direction (x/z, y/z, 1) per pixel."""
    u = (np.arange(cam.width) - cam.cx) / cam.fx
    v = (np.arange(cam.height) - cam.cy) / cam.fy
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv, np.ones_like(uu)], axis=2)


def _tangents(positions: np.ndarray):
    """Central-difference x/y tangents of an (H, W, 3) position field."""
    a = np.zeros_like(positions)
    b = np.zeros_like(positions)
    a[:, 1:-1] = 0.5 * (positions[:, 2:] - positions[:, :-2])
    b[1:-1, :] = 0.5 * (positions[2:, :] - positions[:-2, :])
    return a, b


def _stencil_valid(fg: np.ndarray) -> np.ndarray:
    ok = np.zeros_like(fg)
    ok[1:-1, 1:-1] = (
        fg[1:-1, 1:-1] & fg[1:-1, 2:] & fg[1:-1, :-2] & fg[2:, 1:-1] & fg[:-2, 1:-1]
    )
    return ok


def normal_from_depth(depth_map: DepthMap, cam: Camera | None = None) -> NormalMap:
    """Per-pixel camera-space normal: cross product of the central-
    difference tangents of the unprojected positions, oriented toward
    the camera. Pixels whose 5-point stencil touches background are
    invalid."""
    cam = cam or depth_map.camera
    dirs = _pixel_dirs(cam)
    fg = depth_map.mask
    positions = np.where(fg[:, :, None], depth_map.depth[:, :, None] * dirs, 0.0)
    a, b = _tangents(positions)
    c = np.cross(a, b)
    m = np.linalg.norm(c, axis=2)
    ok = _stencil_valid(fg) & (m > 1e-300)
    n = np.zeros_like(c)
    n[ok] = c[ok] / m[ok, None]
    toward = np.einsum("ijk,ijk->ij", n, dirs)
    n[toward > 0] *= -1.0
    return NormalMap(n, ok)


def blend_normals(n1: NormalMap, n2: NormalMap, weights) -> NormalMap:
    """Convex normal blend with renormalization, sharing the texture
    blending weights. Pixels valid in one view only take that view."""
    w = np.asarray(weights.values if hasattr(weights, "values") else weights, dtype=np.float64)
    both = n1.valid & n2.valid
    w_eff = np.where(both, w, np.where(n1.valid, 1.0, 0.0))
    mixed = w_eff[:, :, None] * n1.values + (1.0 - w_eff)[:, :, None] * n2.values
    m = np.linalg.norm(mixed, axis=2)
    ok = (n1.valid | n2.valid) & (m > 1e-9)
    out = np.zeros_like(mixed)
    out[ok] = mixed[ok] / m[ok, None]
    return NormalMap(out, ok)


def normal_residual(depth_map: DepthMap, target: NormalMap, cam: Camera | None = None) -> float:
    """Mean squared discrepancy between the depth map's normals and the
    target normal map over jointly valid pixels."""
    n = normal_from_depth(depth_map, cam)
    both = n.valid & target.valid
    if not both.any():
        return 0.0
    diff = n.values[both] - target.values[both]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def _residual_and_grad(depth: np.ndarray, fg: np.ndarray, dirs: np.ndarray, target: NormalMap):
    """Sum of squared normal discrepancies and its gradient wrt depth.

    The orientation sign of each normal is treated as locally constant.
    """
    positions = np.where(fg[:, :, None], depth[:, :, None] * dirs, 0.0)
    a, b = _tangents(positions)
    c = np.cross(a, b)
    m = np.linalg.norm(c, axis=2)
    ok = _stencil_valid(fg) & target.valid & (m > 1e-300)

    n_hat = np.zeros_like(c)
    n_hat[ok] = c[ok] / m[ok, None]
    toward = np.einsum("ijk,ijk->ij", n_hat, dirs)
    sign = np.where(toward > 0, -1.0, 1.0)
    n_or = sign[:, :, None] * n_hat

    r = np.where(ok[:, :, None], n_or - target.values, 0.0)
    loss = float(np.sum(r * r))

    # dL/dc = (2 s / m) (r - (r . n_hat) n_hat)
    rn = np.einsum("ijk,ijk->ij", r, n_hat)
    g_c = np.zeros_like(c)
    g_c[ok] = (2.0 * sign[ok] / m[ok])[:, None] * (r[ok] - rn[ok, None] * n_hat[ok])
    g_a = np.cross(b, g_c)
    g_b = np.cross(g_c, a)

    # scatter through the central differences: a = (X(+ex) - X(-ex)) / 2,
    # so pixel q = p + ex receives +0.5 * g_a(p) . dirs(q)
    grad = np.zeros_like(depth)
    grad[:, 2:] += 0.5 * np.einsum("ijk,ijk->ij", g_a[:, 1:-1], dirs[:, 2:])
    grad[:, :-2] -= 0.5 * np.einsum("ijk,ijk->ij", g_a[:, 1:-1], dirs[:, :-2])
    grad[2:, :] += 0.5 * np.einsum("ijk,ijk->ij", g_b[1:-1, :], dirs[2:, :])
    grad[:-2, :] -= 0.5 * np.einsum("ijk,ijk->ij", g_b[1:-1, :], dirs[:-2, :])
    grad[~fg] = 0.0
    return loss, grad


def refine_depth_with_normal(
    d_hat: DepthMap,
    n_t: NormalMap,
    iters: int = 200,
    step: float = 0.5,
    damping: float = 1e-2,
    return_history: bool = False,
):
    """Gradient descent on a per-pixel displacement field minimizing
    sum ||normals(D + d) - N_t||^2 + damping * ||d||^2.

    Backtracking line search (halving from `step`) accepts a step only
    when neither the data term nor the damped objective increases, so
    the residual is monotone non-increasing across iterations.
    """
    cam = d_hat.camera
    dirs = _pixel_dirs(cam)
    fg = d_hat.mask
    base = np.where(fg, d_hat.depth, 0.0)
    disp = np.zeros_like(base)

    data, grad = _residual_and_grad(base, fg, dirs, n_t)
    total = data
    history = [data]
    alpha = step
    for _ in range(max(0, iters)):
        grad_total = grad + 2.0 * damping * disp
        gnorm = np.abs(grad_total).max()
        if gnorm == 0.0:
            history.append(data)
            continue
        accepted = False
        trial = alpha
        for _ in range(40):
            cand = disp - trial * grad_total
            c_data, c_grad = _residual_and_grad(base + cand, fg, dirs, n_t)
            c_total = c_data + damping * float(np.sum(cand * cand))
            if c_data <= data and c_total <= total:
                disp = cand
                data, grad, total = c_data, c_grad, c_total
                alpha = min(trial * 1.5, step)
                accepted = True
                break
            trial *= 0.5
        history.append(data)
        if not accepted:
            break

    out = np.where(fg, base + disp, BACKGROUND)
    # refinement must not push depths nonpositive
    out = np.where(fg & (out <= 0), d_hat.depth, out)
    refined = DepthMap(out, cam)
    if return_history:
        return refined, history
    return refined
