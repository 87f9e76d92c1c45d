"""Acceptance suite: one test per headline criterion, pinned tolerances.

Each test prints a single `ACCEPT <name>: PASS/FAIL` line (run pytest
with -s or read captured output) in addition to asserting, so the suite
doubles as a human-readable checklist.
"""

import hashlib
import time

import numpy as np
import pytest

from fvvren import pipeline, scenes
from fvvren.blending import (
    BlendWeightMap,
    HeuristicWeightProvider,
    OcclusionMap,
    bilinear_upsample_depth,
    blend,
    boundary_band,
    occlusion_map,
    upsample_boundary_aware,
    warp_depth,
    warp_image,
)
from fvvren.cameras import make_rig, orbit_camera, save_rig, load_rig
from fvvren.cli import main as cli_main
from fvvren.depthrender import DepthMap, SampleSpec, render_depth
from fvvren.errors import ParseError
from fvvren.fields import MlpWeights, load_mlp, save_mlp
from fvvren.normals import normal_from_depth, refine_depth_with_normal


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPT {name}: {'PASS' if ok else 'FAIL'}{' — ' + detail if detail else ''}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def target_256(ring_rig):
    # off the rig ring: nonzero pitch, yaw between cameras 0 and 1
    return orbit_camera(ring_rig, 30.0, 10.0, 3.0, (256, 256))


@pytest.fixture(scope="module")
def depth_256(target_256, sphere_hull, sphere_field, sphere_spec):
    return render_depth(target_256, sphere_hull, sphere_field, sphere_spec)


class TestDepthCorrectness:
    def test_depth_correctness(self, target_256, sphere_hull, sphere_field, sphere_spec, sphere_scene, monkeypatch):
        monkeypatch.setenv("FVV_WORKERS", "1")
        t0 = time.perf_counter()
        d = render_depth(target_256, sphere_hull, sphere_field, sphere_spec)
        elapsed = time.perf_counter() - t0
        gt = scenes.gt_render(sphere_scene, target_256)
        fg = gt.mask
        both = d.mask & fg
        err = np.full(fg.shape, np.inf)
        err[both] = np.abs(d.depth[both] - gt.depth[both])
        frac_half_k = float((err[fg] <= sphere_spec.k / 2.0).mean())
        frac_2e3 = float((err[fg] <= 2e-3).mean())
        ok = frac_half_k >= 0.99 and frac_2e3 >= 0.95 and elapsed <= 60.0
        report(
            "depth-correctness",
            ok,
            f"|err|<=k/2 on {frac_half_k:.4f}, <=2e-3 on {frac_2e3:.4f}, {elapsed:.1f}s",
        )


class TestHierarchicalEqualsBruteForce:
    def test_dense_sampler_agreement(self, target_256, sphere_hull, sphere_field, sphere_spec, depth_256):
        dense = render_depth(
            target_256, sphere_hull, sphere_field,
            SampleSpec(k=sphere_spec.k / 64.0, max_samples=40000),
        )
        both = depth_256.mask & dense.mask
        agree = float((np.abs(depth_256.depth[both] - dense.depth[both]) <= sphere_spec.k / 2.0).mean())
        cover = float((depth_256.mask == dense.mask).mean())
        ok = agree >= 0.99 and cover >= 0.99
        report("hierarchical-vs-dense", ok, f"agreement {agree:.4f}, mask match {cover:.4f}")

    def test_pruning_and_early_term(self, target_256, sphere_hull, sphere_field, sphere_spec, depth_256):
        sphere_field.reset_eval_count()
        fast = render_depth(
            target_256, sphere_hull, sphere_field, sphere_spec, prune=True, early_stop=True
        )
        evals_fast = sphere_field.eval_count
        sphere_field.reset_eval_count()
        slow = render_depth(
            target_256, sphere_hull, sphere_field, sphere_spec, prune=False, early_stop=False
        )
        evals_slow = sphere_field.eval_count
        changed = int((fast.depth != slow.depth).sum())
        ratio = evals_slow / max(evals_fast, 1)
        ok = changed == 0 and ratio >= 5.0
        report(
            "pruning-early-termination",
            ok,
            f"{changed} pixels changed, eval reduction {ratio:.1f}x",
        )


class TestWarpingIdentity:
    def test_identity_chain(self, target_256, depth_256, sphere_scene):
        gt = scenes.gt_render(sphere_scene, target_256)
        warped = warp_image(target_256, gt.rgb, target_256, depth_256)
        wd, rp, valid = warp_depth(target_256, depth_256, target_256, depth_256)
        occ = occlusion_map(wd, rp, valid)
        interior = depth_256.mask & ~boundary_band(depth_256.mask, 2) & warped.valid
        img_err = float(np.abs(warped.rgb[interior] - gt.rgb[interior]).max())
        occ_err = float(np.abs(occ.values[interior & valid]).max())
        ok = img_err <= 1.0 / 255.0 and occ_err <= 1e-6
        report("warping-identity", ok, f"image err {img_err:.2e}, |O| {occ_err:.2e}")


class TestBlendingAlgebra:
    def test_blending_algebra(self):
        rng = np.random.default_rng(20240823)
        shape = (1000, 1000)  # 10^6 fuzzed pixels
        w = rng.uniform(0, 1, size=shape)
        i1 = rng.uniform(0, 1, size=shape)
        i2 = rng.uniform(0, 1, size=shape)
        out = blend(BlendWeightMap(w), i1, i2)
        convex = bool(
            (out >= np.minimum(i1, i2) - 1e-12).all() and (out <= np.maximum(i1, i2) + 1e-12).all()
        )

        o1 = rng.normal(size=(64, 64))
        o2 = rng.normal(size=(64, 64))
        valid = np.ones((64, 64), bool)
        p = HeuristicWeightProvider(beta=0.7, gamma=3.0)
        a1 = rng.uniform(0, 1, size=(64, 64))
        a2 = rng.uniform(0, 1, size=(64, 64))
        w12 = p(OcclusionMap(o1, valid), OcclusionMap(o2, valid), a1, a2).values
        w21 = p(OcclusionMap(o2, valid), OcclusionMap(o1, valid), a2, a1).values
        antisym = float(np.abs(w12 + w21 - 1.0).max())

        ones = np.array_equal(blend(BlendWeightMap(np.ones(shape)), i1, i2), i1)
        zeros = np.array_equal(blend(BlendWeightMap(np.zeros(shape)), i1, i2), i2)
        ok = convex and antisym <= 1e-6 and ones and zeros
        report(
            "blending-algebra",
            ok,
            f"convex {convex}, antisymmetry {antisym:.2e}, endpoints {ones and zeros}",
        )


class TestBoundaryAwareUpsampling:
    def test_boundary_band_improves(self, sphere_scene, sphere_hull, sphere_field, sphere_spec, ring_rig):
        low_cam = orbit_camera(ring_rig, 30.0, 10.0, 3.0, (256, 256))
        d_low = render_depth(low_cam, sphere_hull, sphere_field, sphere_spec)
        hi_res = (1024, 1024)
        hi_cam = low_cam.with_resolution(*hi_res)
        naive = bilinear_upsample_depth(d_low, hi_cam)
        aware = upsample_boundary_aware(
            d_low, sphere_hull, sphere_field, sphere_spec, hi_res, radius=2
        )
        gt = scenes.gt_render(sphere_scene, hi_cam)
        band = boundary_band(naive.mask, int(round(2 * 1024 / 256)))

        def band_error(dm):
            pred_fg = dm.mask & band
            gt_fg = gt.mask & band
            both = pred_fg & gt_fg
            err = np.abs(dm.depth[both] - gt.depth[both]).sum()
            return (err + (pred_fg ^ gt_fg).sum() * 1.0) / band.sum()

        e_aware = band_error(aware)
        e_naive = band_error(naive)
        interior_equal = bool(np.array_equal(aware.depth[~band], naive.depth[~band]))
        ok = e_aware < e_naive and interior_equal
        report(
            "boundary-aware-upsampling",
            ok,
            f"band err {e_aware:.5f} < bilinear {e_naive:.5f}, interior bit-equal {interior_equal}",
        )


class TestNormalPipeline:
    def test_normal_from_depth_accuracy(self, sphere_scene, ring_rig):
        from scipy import ndimage

        cam = orbit_camera(ring_rig, 30.0, 10.0, 3.0, (256, 256))
        gt = scenes.gt_render(sphere_scene, cam)
        n = normal_from_depth(DepthMap(gt.depth, cam))
        interior = n.valid & gt.mask & (ndimage.distance_transform_edt(gt.mask) >= 3)
        dots = np.clip(np.einsum("ijk,ijk->ij", n.values, gt.normal), -1, 1)
        mean_deg = float(np.degrees(np.arccos(dots[interior])).mean())
        ok = mean_deg < 5.0
        report("normal-from-depth", ok, f"mean angular error {mean_deg:.2f} deg")

    def test_refinement_residual(self, sphere_scene, ring_rig):
        cam = orbit_camera(ring_rig, 25.0, 15.0, 3.0, (96, 96))
        gt = scenes.gt_render(sphere_scene, cam)
        d_gt = DepthMap(gt.depth, cam)
        n_t = normal_from_depth(d_gt)
        h, w = gt.depth.shape
        vv, uu = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        ripple = 0.01 * np.sin(uu / 6.0) * np.cos(vv / 7.0)
        biased = DepthMap(np.where(gt.mask, gt.depth + ripple, np.inf), cam)
        _, history = refine_depth_with_normal(biased, n_t, iters=200, return_history=True)
        history = np.asarray(history)
        monotone = bool((np.diff(history) <= 1e-12).all())
        final_ratio = float(history[-1] / history[0])
        ok = monotone and final_ratio <= 0.5
        report(
            "normal-refinement",
            ok,
            f"monotone {monotone}, final residual {final_ratio:.3f} of initial",
        )


class TestEndToEnd:
    def test_end_to_end_mae(self, sphere_scene, ring_rig):
        cfg = pipeline.PipelineConfig(scene=sphere_scene, rig=ring_rig)
        ctx = pipeline.build_context(cfg)
        target = orbit_camera(ring_rig, 30.0, 0.0, 3.0)
        vm = pipeline.evaluate_view(ctx, target, view_id=0)
        # first oracle run measured 4.300; pinned with headroom, still
        # well under the 8.0 design bound
        ok = vm.mae_fg < 5.5 and vm.mae_fg < 8.0
        report("end-to-end-mae", ok, f"foreground MAE {vm.mae_fg:.3f} (bound 8.0, pinned 5.5)")


class TestCameraAblation:
    def test_ablation_trend(self, sphere_scene, ring_rig):
        cfg = pipeline.PipelineConfig(
            scene=sphere_scene, rig=ring_rig, low_res=64, hi_res=128, grid_divisions=96
        )
        reports = pipeline.ablate_cameras(cfg, [2, 4, 6], n_targets=30)
        m = {r.metadata["n_cameras"]: r.aggregate("mae_fg") for r in reports}
        ok = m[2] > m[4] > m[6]
        report(
            "camera-ablation-trend",
            ok,
            f"mae(2)={m[2]:.2f} > mae(4)={m[4]:.2f} > mae(6)={m[6]:.2f}",
        )


class TestDeterminism:
    def test_cli_byte_identical(self, tmp_path):
        scene_path = tmp_path / "scene.json"
        scenes.save_scene(scenes.sphere_checker_scene(), scene_path)
        args = [
            "render", "--scene", str(scene_path), "--yaw", "30", "--pitch", "10",
            "--low-res", "32", "--hi-res", "64", "--grid", "48", "--refine-iters", "3",
        ]
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert cli_main(args + ["--out", str(out_a)]) == 0
        assert cli_main(args + ["--out", str(out_b)]) == 0

        def digests(root):
            return {
                p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(root.iterdir())
            }

        da, db = digests(out_a), digests(out_b)
        ok = da == db and len(da) == 4
        report("cli-determinism", ok, f"{len(da)} artifacts byte-identical")


class TestFileFormats:
    def test_round_trips_and_errors(self, tmp_path):
        rig = make_rig(6, 3.0)
        rig_path = tmp_path / "rig.json"
        save_rig(rig, rig_path)
        rig_back = load_rig(rig_path)
        rig_ok = all(
            np.array_equal(a.rotation, b.rotation)
            and np.array_equal(a.translation, b.translation)
            and (a.fx, a.fy, a.cx, a.cy, a.width, a.height)
            == (b.fx, b.fy, b.cx, b.cy, b.width, b.height)
            for a, b in zip(rig.cameras, rig_back.cameras)
        )

        scene = scenes.two_sphere_scene()
        scene_path = tmp_path / "scene.json"
        scenes.save_scene(scene, scene_path)
        scene_back = scenes.load_scene(scene_path)
        pts = np.random.default_rng(0).normal(size=(64, 3))
        scene_ok = bool(
            np.array_equal(scenes.scene_sdf(scene, pts), scenes.scene_sdf(scene_back, pts))
        )

        rng = np.random.default_rng(5)
        w = MlpWeights(
            (rng.normal(size=(4, 8)).astype(np.float32), rng.normal(size=(1, 4)).astype(np.float32)),
            (rng.normal(size=4).astype(np.float32), rng.normal(size=1).astype(np.float32)),
            "logistic",
        )
        mlp_path = tmp_path / "w.mlpw"
        save_mlp(w, mlp_path)
        back = load_mlp(mlp_path)
        mlp_ok = all(np.array_equal(a, b) for a, b in zip(w.matrices, back.matrices)) and all(
            np.array_equal(a, b) for a, b in zip(w.biases, back.biases)
        )

        errors_ok = True
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        for loader, path in ((load_rig, bad), (scenes.load_scene, bad)):
            try:
                loader(path)
                errors_ok = False
            except ParseError:
                pass
        badw = tmp_path / "bad.mlpw"
        badw.write_bytes(b"XXXX" + b"\x00" * 16)
        try:
            load_mlp(badw)
            errors_ok = False
        except ParseError:
            pass

        ok = rig_ok and scene_ok and mlp_ok and errors_ok
        report(
            "file-formats",
            ok,
            f"rig {rig_ok}, scene {scene_ok}, mlp {mlp_ok}, error classes {errors_ok}",
        )
