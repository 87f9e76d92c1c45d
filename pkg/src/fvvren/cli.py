"""Command-line tool: carve | render | eval | ablate | serve."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import imageio, metrics, pipeline, scenes
from .cameras import load_rig, make_rig, orbit_camera
from .errors import FvvError


def _add_scene_rig_args(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--rig", help="rig JSON file (default: synthesized 6-camera ring)")
    p.add_argument("--ring-size", type=int, default=6, help="ring size when synthesizing a rig")
    p.add_argument("--rig-radius", type=float, help="ring radius (default 1.5x scene diagonal)")
    p.add_argument("--rig-height", type=float, default=0.0)


def _add_pipeline_args(p: argparse.ArgumentParser):
    p.add_argument("--low-res", type=int, default=256)
    p.add_argument("--hi-res", type=int, default=1024)
    p.add_argument("--k", type=float, help="depth sample spacing (scene units)")
    p.add_argument("--tau", type=float, help="occupancy sharpness")
    p.add_argument("--beta", type=float, help="blend occlusion softness")
    p.add_argument("--gamma", type=float, default=4.0)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--band-radius", type=int, default=2)
    p.add_argument("--refine-iters", type=int, default=30)
    p.add_argument("--grid", type=int, default=128, help="hull grid divisions")


def _load_scene_rig(args) -> tuple:
    if not os.path.exists(args.scene):
        raise FvvError(f"scene file not found: {args.scene}")
    scene = scenes.load_scene(args.scene)
    if args.rig:
        if not os.path.exists(args.rig):
            raise FvvError(f"rig file not found: {args.rig}")
        rig = load_rig(args.rig)
    else:
        radius = args.rig_radius if args.rig_radius else 1.5 * scene.diagonal()
        rig = make_rig(args.ring_size, radius, args.rig_height)
    return scene, rig


def _config(args, scene, rig) -> pipeline.PipelineConfig:
    return pipeline.PipelineConfig(
        scene=scene,
        rig=rig,
        low_res=args.low_res,
        hi_res=args.hi_res,
        k=args.k,
        tau=args.tau,
        beta=args.beta,
        gamma=args.gamma,
        lam=args.lam,
        band_radius=args.band_radius,
        refine_iters=args.refine_iters,
        grid_divisions=args.grid,
    )


def cmd_carve(args) -> int:
    scene, rig = _load_scene_rig(args)
    masks = scenes.gt_masks(scene, rig)
    lo, hi = scene.aabb()
    from .hull import carve

    spacing = float(np.linalg.norm(hi - lo)) / args.grid
    hull = carve(rig, masks, (lo, hi), spacing)
    hull.save(args.out)
    print(f"carved {hull.count} occupied voxels ({hull.dims[0]}x{hull.dims[1]}x{hull.dims[2]}) -> {args.out}")
    return 0


def cmd_render(args) -> int:
    scene, rig = _load_scene_rig(args)
    cfg = _config(args, scene, rig)
    ctx = pipeline.build_context(cfg)
    dist = args.dist if args.dist else float(np.linalg.norm(rig.cameras[0].position - rig.center))
    target = orbit_camera(rig, args.yaw, args.pitch, dist)
    result = pipeline.run_frame(ctx, target)

    os.makedirs(args.out, exist_ok=True)
    imageio.write_png(os.path.join(args.out, "color.png"), result.color)
    imageio.write_pfm(os.path.join(args.out, "depth.pfm"), result.depth_refined.depth)
    normal_vis = np.where(result.normal.valid[:, :, None], result.normal.values * 0.5 + 0.5, 0.0)
    imageio.write_png(os.path.join(args.out, "normal.png"), normal_vis)
    imageio.write_pgm(os.path.join(args.out, "weights.pgm"), result.weights_hi.values)
    total_ms = sum(result.timings_ms.values())
    stage_txt = ", ".join(f"{k} {v:.0f}ms" for k, v in result.timings_ms.items())
    print(f"rendered to {args.out} ({total_ms:.0f}ms: {stage_txt}; {result.field_evals} field evals)")
    return 0


def _run_eval(args) -> int:
    scene, rig = _load_scene_rig(args)
    cfg = _config(args, scene, rig)
    sizes = sorted({int(s) for s in str(args.cams).split(",")})
    reports = pipeline.ablate_cameras(cfg, sizes, n_targets=args.targets)
    os.makedirs(args.out, exist_ok=True)
    metrics.reports_to_csv(reports, os.path.join(args.out, "report.csv"))
    import json

    with open(os.path.join(args.out, "report.json"), "w") as f:
        json.dump([r.to_json() for r in reports], f, indent=2, sort_keys=True)
        f.write("\n")
    for report in reports:
        print(
            f"cams={report.metadata['n_cameras']}: "
            f"mae_fg={report.aggregate('mae_fg'):.3f} "
            f"depth_mae={report.aggregate('depth_mae'):.5f} "
            f"normal_deg={report.aggregate('normal_angle_deg'):.2f}"
        )
    return 0


def cmd_serve(args) -> int:
    scene, rig = _load_scene_rig(args)
    cfg = _config(args, scene, rig)
    ctx = pipeline.build_context(cfg)
    from .service import serve

    print(f"serving {args.scene} on http://{args.host}:{args.port}")
    serve(ctx, host=args.host, port=args.port, default_res=args.res)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvvren", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("carve", help="voxel-carve the silhouette hull")
    _add_scene_rig_args(p)
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--out", required=True, help="output .npz hull file")
    p.set_defaults(fn=cmd_carve)

    p = sub.add_parser("render", help="render one novel view")
    _add_scene_rig_args(p)
    _add_pipeline_args(p)
    p.add_argument("--yaw", type=float, default=30.0)
    p.add_argument("--pitch", type=float, default=10.0)
    p.add_argument("--dist", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_render)

    for name, default_sizes in (("eval", "6"), ("ablate", "2,4,6")):
        p = sub.add_parser(name, help="evaluate over novel views (per camera-subset size)")
        _add_scene_rig_args(p)
        _add_pipeline_args(p)
        p.add_argument("--cams", default=default_sizes,
                       help="comma-separated camera-subset sizes, e.g. 2,4,6")
        p.add_argument("--targets", type=int, default=30)
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(fn=_run_eval)

    p = sub.add_parser("serve", help="run the HTTP render service")
    _add_scene_rig_args(p)
    _add_pipeline_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--res", type=int, default=256)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FvvError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
