"""Stateless HTTP render service for interactive viewers.

The scene context (rig, hull, occupancy field, source images) is built
once at startup; every request renders independently from that shared
immutable state.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware

from . import blending
from .cameras import orbit_camera
from .depthrender import render_depth
from .errors import FvvError, PipelineStageError
from .imageio import png_bytes
from .normals import normal_from_depth
from .pipeline import FrameContext

MODES = ("rgb", "depth", "normal", "weights")
MAX_RES = 1024


def render_view(ctx: FrameContext, yaw: float, pitch: float, dist: float, mode: str, res: int) -> np.ndarray:
    """Single-resolution render for the interactive path (no hi-res
    upsampling stage; the CLI covers the full-quality pipeline)."""
    target = orbit_camera(ctx.rig, yaw, pitch, dist, (res, res))
    depth = render_depth(target, ctx.hull, ctx.field, ctx.spec)
    if mode == "depth":
        return _visualize_depth(depth.depth)
    if mode == "normal":
        n = normal_from_depth(depth)
        return np.where(n.valid[:, :, None], n.values * 0.5 + 0.5, 0.0)

    i1, i2 = blending.select_adjacent_views(ctx.rig, target)
    cfg = ctx.config
    cam1 = ctx.rig.cameras[i1].with_resolution(res, res)
    cam2 = ctx.rig.cameras[i2].with_resolution(res, res)
    from .pipeline import _downsample_rgb

    img1 = _downsample_rgb(ctx.source_images_hi[i1], res)
    img2 = _downsample_rgb(ctx.source_images_hi[i2], res)
    w1 = blending.warp_image(cam1, img1, target, depth)
    w2 = blending.warp_image(cam2, img2, target, depth)
    wd1, rp1, v1 = blending.warp_depth(cam1, ctx.source_depth(i1), target, depth)
    wd2, rp2, v2 = blending.warp_depth(cam2, ctx.source_depth(i2), target, depth)
    o1 = blending.occlusion_map(wd1, rp1, v1)
    o2 = blending.occlusion_map(wd2, rp2, v2)
    a1 = blending.view_angle_cosines(ctx.rig.cameras[i1], target, depth)
    a2 = blending.view_angle_cosines(ctx.rig.cameras[i2], target, depth)
    beta = cfg.beta if cfg.beta is not None else 2.0 * ctx.spec.k
    weights = blending.blend_weights(
        w1, o1, w2, o2, blending.HeuristicWeightProvider(beta=beta, gamma=cfg.gamma), a1, a2
    )
    if mode == "weights":
        return weights.values
    return blending.blend(weights, w1.rgb, w2.rgb)


def _visualize_depth(depth: np.ndarray) -> np.ndarray:
    fg = np.isfinite(depth)
    out = np.zeros_like(depth)
    if fg.any():
        lo = depth[fg].min()
        hi = depth[fg].max()
        span = hi - lo if hi > lo else 1.0
        # near = bright
        out[fg] = 1.0 - 0.9 * (depth[fg] - lo) / span
    return out


def create_app(ctx: FrameContext, default_res: int = 256) -> FastAPI:
    app = FastAPI(title="fvvren render service")
    # the browser viewer may be served from a different origin (e.g. a
    # static file server); the API is read-only, so open CORS is safe
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET"], allow_headers=["*"]
    )

    @app.get("/health")
    def health():
        return Response(content="ok", media_type="text/plain")

    @app.get("/rig")
    def rig():
        return {
            "center": [float(v) for v in ctx.rig.center],
            "cameras": [
                {
                    "fx": c.fx,
                    "fy": c.fy,
                    "cx": c.cx,
                    "cy": c.cy,
                    "width": c.width,
                    "height": c.height,
                    "rotation": [float(v) for v in c.rotation.reshape(9)],
                    "translation": [float(v) for v in c.translation],
                }
                for c in ctx.rig.cameras
            ],
        }

    @app.get("/render")
    def render(
        yaw: float = 0.0,
        pitch: float = 0.0,
        dist: float | None = None,
        mode: str = "rgb",
        res: int | None = None,
    ):
        if mode not in MODES:
            return Response(
                content=f"unknown mode '{mode}'; expected one of {', '.join(MODES)}",
                status_code=400,
                media_type="text/plain",
            )
        if not (-85.0 <= pitch <= 85.0):
            return Response(content="pitch must lie in [-85, 85]", status_code=400, media_type="text/plain")
        if dist is None:
            dist = float(np.linalg.norm(ctx.rig.cameras[0].position - ctx.rig.center))
        if dist <= 0:
            return Response(content="dist must be positive", status_code=400, media_type="text/plain")
        res = res or default_res
        if not (16 <= res <= MAX_RES):
            return Response(
                content=f"res must lie in [16, {MAX_RES}]", status_code=400, media_type="text/plain"
            )
        try:
            img = render_view(ctx, yaw, pitch, dist, mode, res)
        except PipelineStageError as e:
            return Response(content=str(e), status_code=500, media_type="text/plain")
        except FvvError as e:
            return Response(content=f"render failed: {e}", status_code=500, media_type="text/plain")
        return Response(content=png_bytes(img), media_type="image/png")

    return app


def serve(ctx: FrameContext, host: str = "127.0.0.1", port: int = 8571, default_res: int = 256):
    """Blocking server loop (returns on shutdown signal)."""
    import uvicorn

    uvicorn.run(create_app(ctx, default_res), host=host, port=port, log_level="warning")
