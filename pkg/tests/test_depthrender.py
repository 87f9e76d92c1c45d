"""Depth rendering: bracketing, midpoint/offset refinement, dense-sampler
agreement, early termination, and hull pruning."""

import numpy as np
import pytest

from fvvren import scenes
from fvvren.cameras import orbit_camera, pixel_ray
from fvvren.depthrender import (
    DepthMap,
    SampleSpec,
    default_spec,
    localize_depth,
    refine_depth,
    render_depth,
)
from fvvren.errors import ConfigError, EmptyHullError, ValidationError
from fvvren.hull import VoxelHull, ray_hull_interval


class TestSampleSpec:
    def test_invalid_k(self):
        with pytest.raises(ValidationError):
            SampleSpec(k=0.0)

    def test_invalid_max_samples(self):
        with pytest.raises(ValidationError):
            SampleSpec(k=0.1, max_samples=1)

    def test_default_spec_scale(self, sphere_hull):
        spec = default_spec(sphere_hull)
        assert 0.001 < spec.k < 0.1


class TestDepthMap:
    def test_background_must_be_inf_not_zero(self, ring_rig):
        cam = orbit_camera(ring_rig, 0, 0, 3.0, (4, 4))
        with pytest.raises(ValidationError):
            DepthMap(np.zeros((4, 4)), cam)

    def test_shape_checked(self, ring_rig):
        cam = orbit_camera(ring_rig, 0, 0, 3.0, (4, 4))
        with pytest.raises(ValidationError):
            DepthMap(np.full((5, 4), np.inf), cam)

    def test_mask(self, ring_rig):
        cam = orbit_camera(ring_rig, 0, 0, 3.0, (2, 2))
        d = np.full((2, 2), np.inf)
        d[0, 1] = 2.5
        dm = DepthMap(d, cam)
        assert dm.mask.sum() == 1 and dm.mask[0, 1]


class TestLocalize:
    def test_bracket_straddles_surface(self, sphere_hull, sphere_field, sphere_spec, ring_rig):
        cam = orbit_camera(ring_rig, 30.0, 10.0, 3.0, (256, 256))
        ray = pixel_ray(cam, (128.0, 128.0))
        iv = ray_hull_interval(sphere_hull, ray)
        out = localize_depth(ray, iv, sphere_field, sphere_spec, cam)
        assert out is not None
        x_a, x_b, d_mid = out
        assert np.linalg.norm(x_a) > 1.0 > np.linalg.norm(x_b)  # outside -> inside
        # consecutive samples are exactly k apart in camera depth
        dz = float((cam.rotation @ ray.direction)[2])
        z_a = (x_a - ray.origin) @ ray.direction * dz
        z_b = (x_b - ray.origin) @ ray.direction * dz
        assert np.isclose(z_b - z_a, sphere_spec.k, atol=1e-9)
        assert np.isclose(d_mid, z_a + sphere_spec.k / 2.0, atol=1e-9)

    def test_none_interval(self, sphere_field, sphere_spec, ring_rig):
        cam = orbit_camera(ring_rig, 0.0, 0.0, 3.0)
        ray = pixel_ray(cam, (0.0, 0.0))
        assert localize_depth(ray, None, sphere_field, sphere_spec, cam) is None

    def test_refine_beats_midpoint(self, sphere_hull, sphere_field, sphere_spec, ring_rig):
        cam = orbit_camera(ring_rig, 77.0, -5.0, 3.0, (256, 256))
        ray = pixel_ray(cam, (120.0, 140.0))
        iv = ray_hull_interval(sphere_hull, ray)
        x_a, x_b, d_mid = localize_depth(ray, iv, sphere_field, sphere_spec, cam)
        d_ref = refine_depth(x_a, x_b, d_mid, sphere_field, sphere_spec)
        # true depth via closed-form sphere intersection
        oc = ray.origin
        b = ray.direction @ oc
        t = -b - np.sqrt(b * b - (oc @ oc - 1.0))
        dz = float((cam.rotation @ ray.direction)[2])
        d_true = t * dz
        assert abs(d_ref - d_true) < abs(d_mid - d_true)
        assert abs(d_ref - d_true) < 1e-6

    def test_refine_falls_back_without_crossing(self, sphere_field, sphere_spec):
        d = refine_depth((3.0, 0, 0), (4.0, 0, 0), 1.23, sphere_field, sphere_spec)
        assert d == 1.23

    def test_literal_compose_differs_by_half_k(self, sphere_hull, sphere_field, sphere_spec, ring_rig):
        cam = orbit_camera(ring_rig, 13.0, 3.0, 3.0, (256, 256))
        ray = pixel_ray(cam, (128.0, 128.0))
        iv = ray_hull_interval(sphere_hull, ray)
        x_a, x_b, d_mid = localize_depth(ray, iv, sphere_field, sphere_spec, cam)
        seg = refine_depth(x_a, x_b, d_mid, sphere_field, sphere_spec)
        lit_spec = SampleSpec(k=sphere_spec.k, literal_offset_compose=True)
        lit = refine_depth(x_a, x_b, d_mid, sphere_field, lit_spec)
        assert np.isclose(lit - seg, sphere_spec.k / 2.0, atol=1e-12)


@pytest.fixture(scope="module")
def target_cam(ring_rig):
    return orbit_camera(ring_rig, 30.0, 10.0, 3.0, (128, 128))


@pytest.fixture(scope="module")
def rendered(target_cam, sphere_hull, sphere_field, sphere_spec):
    return render_depth(target_cam, sphere_hull, sphere_field, sphere_spec)


class TestRenderDepth:
    def test_matches_ground_truth(self, rendered, target_cam, sphere_scene, sphere_spec):
        gt = scenes.gt_render(sphere_scene, target_cam)
        assert (gt.mask == rendered.mask).all()
        err = np.abs(rendered.depth[gt.mask] - gt.depth[gt.mask])
        assert err.max() < sphere_spec.k / 2.0

    def test_background_is_inf(self, rendered):
        assert np.isinf(rendered.depth[~rendered.mask]).all()
        assert (rendered.depth[rendered.mask] > 0).all()

    def test_unrefined_within_half_k(self, target_cam, sphere_hull, sphere_field, sphere_spec, sphere_scene):
        d = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec, refine=False)
        gt = scenes.gt_render(sphere_scene, target_cam)
        both = gt.mask & d.mask
        err = np.abs(d.depth[both] - gt.depth[both])
        # midpoint rule: error bounded by half the sample spacing
        assert err.max() <= sphere_spec.k / 2.0 + 1e-12

    def test_agrees_with_dense_sampler(self, target_cam, sphere_hull, sphere_field, sphere_spec, rendered):
        dense_spec = SampleSpec(k=sphere_spec.k / 64.0, max_samples=20000)
        dense = render_depth(target_cam, sphere_hull, sphere_field, dense_spec)
        both = rendered.mask & dense.mask
        agree = np.abs(rendered.depth[both] - dense.depth[both]) <= sphere_spec.k / 2.0
        assert agree.mean() >= 0.99

    def test_early_termination_identical_fewer_evals(self, target_cam, sphere_hull, sphere_field, sphere_spec, rendered):
        sphere_field.reset_eval_count()
        with_stop = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec, early_stop=True)
        evals_stop = sphere_field.eval_count
        sphere_field.reset_eval_count()
        no_stop = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec, early_stop=False)
        evals_full = sphere_field.eval_count
        assert np.array_equal(with_stop.depth, no_stop.depth)
        assert evals_stop < evals_full

    def test_pruning_identical_fewer_evals(self, target_cam, sphere_hull, sphere_field, sphere_spec, rendered):
        sphere_field.reset_eval_count()
        pruned = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec, prune=True)
        evals_pruned = sphere_field.eval_count
        sphere_field.reset_eval_count()
        unpruned = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec, prune=False)
        evals_full = sphere_field.eval_count
        assert np.array_equal(pruned.depth, unpruned.depth)
        assert evals_pruned < evals_full

    def test_pixel_mask_restricts(self, target_cam, sphere_hull, sphere_field, sphere_spec, rendered):
        mask = np.zeros((128, 128), dtype=bool)
        mask[40:80, 40:80] = True
        partial = render_depth(
            target_cam, sphere_hull, sphere_field, sphere_spec, pixel_mask=mask
        )
        assert np.array_equal(partial.depth[mask], rendered.depth[mask])
        assert np.isinf(partial.depth[~mask]).all()

    def test_pixel_mask_shape_checked(self, target_cam, sphere_hull, sphere_field, sphere_spec):
        with pytest.raises(ConfigError):
            render_depth(
                target_cam, sphere_hull, sphere_field, sphere_spec,
                pixel_mask=np.ones((4, 4), bool),
            )

    def test_empty_hull_rejected(self, target_cam, sphere_field, sphere_spec):
        empty = VoxelHull(np.zeros(3), 1.0, (2, 2, 2), np.zeros((2, 2, 2), bool))
        with pytest.raises(EmptyHullError):
            render_depth(target_cam, empty, sphere_field, sphere_spec)

    def test_worker_count_does_not_change_output(
        self, target_cam, sphere_hull, sphere_field, sphere_spec, rendered, monkeypatch
    ):
        monkeypatch.setenv("FVV_WORKERS", "4")
        d4 = render_depth(target_cam, sphere_hull, sphere_field, sphere_spec)
        assert np.array_equal(d4.depth, rendered.depth)
