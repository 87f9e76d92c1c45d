"""Warping, occlusion, blend weights, compositing, and upsampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvvren import blending, scenes
from fvvren.blending import (
    BlendWeightMap,
    HeuristicWeightProvider,
    OcclusionMap,
    WarpedImage,
    bilinear_upsample,
    bilinear_upsample_depth,
    bilinear_upsample_weights,
    blend,
    blend_weights,
    boundary_band,
    occlusion_map,
    select_adjacent_views,
    upsample_boundary_aware,
    view_angle_cosines,
    warp_depth,
    warp_image,
)
from fvvren.cameras import orbit_camera
from fvvren.depthrender import DepthMap, render_depth
from fvvren.errors import ConfigError, ValidationError


@pytest.fixture(scope="module")
def low_cam(ring_rig):
    return orbit_camera(ring_rig, 30.0, 10.0, 3.0, (96, 96))


@pytest.fixture(scope="module")
def low_depth(low_cam, sphere_hull, sphere_field, sphere_spec):
    return render_depth(low_cam, sphere_hull, sphere_field, sphere_spec)


class TestSelectViews:
    def test_adjacent_for_in_between_target(self, ring_rig):
        # yaw 30 sits between cameras 0 (yaw 0) and 1 (yaw 60)
        target = orbit_camera(ring_rig, 30.0, 0.0, 3.0)
        assert select_adjacent_views(ring_rig, target) == (0, 1)

    def test_wraps_around_ring(self, ring_rig):
        target = orbit_camera(ring_rig, 330.0, 0.0, 3.0)
        assert select_adjacent_views(ring_rig, target) == (0, 5)

    def test_tie_breaks_low_index(self, ring_rig):
        target = orbit_camera(ring_rig, 0.0, 0.0, 2.0)
        i1, i2 = select_adjacent_views(ring_rig, target)
        assert i1 == 0


class TestWarpIdentity:
    def test_identity_image_chain(self, low_cam, low_depth, sphere_scene):
        """Warping a view into itself reproduces it on interior pixels."""
        gt = scenes.gt_render(sphere_scene, low_cam)
        warped = warp_image(low_cam, gt.rgb, low_cam, low_depth)
        interior = ~boundary_band(low_depth.mask, 2) & low_depth.mask & warped.valid
        assert interior.any()
        err = np.abs(warped.rgb[interior] - gt.rgb[interior]).max()
        assert err <= 1.0 / 255.0

    def test_identity_occlusion_zero(self, low_cam, low_depth):
        warped, reproj, valid = warp_depth(low_cam, low_depth, low_cam, low_depth)
        o = occlusion_map(warped, reproj, valid)
        interior = ~boundary_band(low_depth.mask, 2) & valid
        assert np.abs(o.values[interior]).max() < 1e-6

    def test_cross_view_warp_consistent(self, ring_rig, low_cam, low_depth, sphere_scene, sphere_hull, sphere_field, sphere_spec):
        """Warping from a nearby real camera matches ground truth where
        the surface is co-visible and unoccluded."""
        src = ring_rig.cameras[0].with_resolution(96, 96)
        src_rgb = scenes.gt_render(sphere_scene, src).rgb
        src_depth = render_depth(src, sphere_hull, sphere_field, sphere_spec)
        warped = warp_image(src, src_rgb, low_cam, low_depth)
        wd, rp, valid = warp_depth(src, src_depth, low_cam, low_depth)
        o = occlusion_map(wd, rp, valid)
        gt = scenes.gt_render(sphere_scene, low_cam)
        co_vis = valid & (np.abs(o.values) < sphere_spec.k) & ~boundary_band(low_depth.mask, 3)
        assert co_vis.sum() > 500
        err = np.abs(warped.rgb[co_vis] - gt.rgb[co_vis]).mean()
        # the 8-cell checker aliases at 96x96, so the bound is loose; a
        # misaligned warp would sit near the inter-color distance (~0.4)
        assert err < 0.2


class TestOcclusion:
    def test_occluded_pixels_flagged(self, ring_rig, sphere_hull, sphere_field, sphere_spec):
        """Two-sphere scene: pixels whose surface the source cannot see
        get strongly negative occlusion values."""
        scene = scenes.two_sphere_scene()
        masks = scenes.gt_masks(scene, ring_rig)
        lo, hi = scene.aabb()
        from fvvren.hull import carve

        hull = carve(ring_rig, masks, (lo, hi))
        field = scenes.oracle_field(scene)
        target = orbit_camera(ring_rig, 20.0, 0.0, 3.0, (96, 96))
        # camera 2 looks from the far side, the small sphere hides behind
        src = ring_rig.cameras[3].with_resolution(96, 96)
        d_t = render_depth(target, hull, field, sphere_spec)
        d_s = render_depth(src, hull, field, sphere_spec)
        wd, rp, valid = warp_depth(src, d_s, target, d_t)
        o = occlusion_map(wd, rp, valid)
        assert (o.values[valid] < -0.1).any()

    def test_nonfinite_valid_rejected(self):
        with pytest.raises(ValidationError):
            OcclusionMap(np.full((2, 2), np.nan), np.ones((2, 2), bool))


class TestWeightAlgebra:
    def make_maps(self, o1, o2, valid=None):
        valid = np.ones_like(o1, dtype=bool) if valid is None else valid
        return OcclusionMap(o1, valid), OcclusionMap(o2, valid)

    def test_antisymmetry(self):
        rng = np.random.default_rng(9)
        o1 = rng.normal(size=(32, 32))
        o2 = rng.normal(size=(32, 32))
        a1 = rng.uniform(0.5, 1.0, size=(32, 32))
        a2 = rng.uniform(0.5, 1.0, size=(32, 32))
        p = HeuristicWeightProvider(beta=0.5, gamma=2.0)
        m1, m2 = self.make_maps(o1, o2)
        w12 = p(m1, m2, a1, a2).values
        w21 = p(m2, m1, a2, a1).values
        assert np.abs(w12 + w21 - 1.0).max() < 1e-6

    def test_one_sided_validity_pins_weight(self):
        o = np.zeros((4, 4))
        v1 = np.zeros((4, 4), bool)
        v1[0] = True
        v2 = np.zeros((4, 4), bool)
        v2[1] = True
        p = HeuristicWeightProvider(beta=1.0)
        w = p(OcclusionMap(o, v1), OcclusionMap(o, v2)).values
        assert (w[0] == 1.0).all()
        assert (w[1] == 0.0).all()
        assert (w[2:] == 0.5).all()

    def test_less_occluded_view_wins(self):
        o1 = np.zeros((2, 2))
        o2 = np.full((2, 2), -3.0)  # view 2 heavily occluded
        p = HeuristicWeightProvider(beta=0.5, gamma=0.0)
        m1, m2 = self.make_maps(o1, o2)
        assert (p(m1, m2).values > 0.95).all()

    @settings(max_examples=30, deadline=None)
    @given(w=st.floats(0, 1), c1=st.floats(0, 1), c2=st.floats(0, 1))
    def test_blend_convexity_scalar(self, w, c1, c2):
        out = blend(BlendWeightMap(np.full((1, 1), w)), np.full((1, 1), c1), np.full((1, 1), c2))
        assert min(c1, c2) - 1e-12 <= out[0, 0] <= max(c1, c2) + 1e-12

    def test_blend_convexity_fuzz_million(self):
        rng = np.random.default_rng(2024)
        shape = (1000, 1000)
        w = BlendWeightMap(rng.uniform(0, 1, size=shape))
        i1 = rng.uniform(0, 1, size=shape)
        i2 = rng.uniform(0, 1, size=shape)
        out = blend(w, i1, i2)
        lo = np.minimum(i1, i2)
        hi = np.maximum(i1, i2)
        assert (out >= lo - 1e-12).all() and (out <= hi + 1e-12).all()

    def test_blend_endpoints_exact(self):
        i1 = np.full((3, 3, 3), 0.7)
        i2 = np.full((3, 3, 3), 0.1)
        assert np.array_equal(blend(BlendWeightMap(np.ones((3, 3))), i1, i2), i1)
        assert np.array_equal(blend(BlendWeightMap(np.zeros((3, 3))), i1, i2), i2)

    def test_weights_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            BlendWeightMap(np.full((2, 2), 1.5))

    def test_blend_weights_uses_provider(self, low_cam, low_depth):
        img = WarpedImage(np.zeros((96, 96, 3)), low_depth.mask)
        o = OcclusionMap(np.zeros((96, 96)), low_depth.mask)
        w = blend_weights(img, o, img, o, HeuristicWeightProvider(beta=1.0))
        assert np.allclose(w.values[low_depth.mask], 0.5)

    def test_view_angle_cosines_range(self, ring_rig, low_cam, low_depth):
        a = view_angle_cosines(ring_rig.cameras[0], low_cam, low_depth)
        fg = low_depth.mask
        assert (np.abs(a[fg]) <= 1.0).all()
        assert (a[~fg] == 0.0).all()


class TestUpsampling:
    def test_bilinear_constant_preserved(self):
        r = np.full((8, 8), 3.25)
        up = bilinear_upsample(r, (32, 32))
        assert np.allclose(up, 3.25)

    def test_bilinear_identity_at_same_res(self):
        rng = np.random.default_rng(1)
        r = rng.normal(size=(16, 16))
        assert np.allclose(bilinear_upsample(r, (16, 16)), r, atol=1e-12)

    def test_weights_clipped(self):
        w = BlendWeightMap(np.random.default_rng(0).uniform(0, 1, (8, 8)))
        up = bilinear_upsample_weights(w, (32, 32))
        assert up.values.min() >= 0.0 and up.values.max() <= 1.0

    def test_depth_upsample_background_propagates(self, low_cam, low_depth):
        hi_cam = low_cam.with_resolution(192, 192)
        up = bilinear_upsample_depth(low_depth, hi_cam)
        # no new foreground is invented: every hi-res fg pixel comes from
        # an all-foreground bilinear neighborhood
        assert up.mask.mean() <= low_depth.mask.mean() + 0.01
        assert np.isinf(up.depth[~up.mask]).all()

    def test_boundary_band_shape(self):
        mask = np.zeros((32, 32), bool)
        mask[8:24, 8:24] = True
        band = boundary_band(mask, 2)
        assert band[8, 8] and band[7, 8] and band[24, 8]
        assert not band[16, 16]  # deep interior
        assert not band[0, 0]  # far background
        assert not boundary_band(mask, 0).any()

    def test_boundary_aware_interior_bit_equal(self, low_depth, sphere_hull, sphere_field, sphere_spec):
        hi_res = (192, 192)
        hi_cam = low_depth.camera.with_resolution(*hi_res)
        naive = bilinear_upsample_depth(low_depth, hi_cam)
        aware = upsample_boundary_aware(low_depth, sphere_hull, sphere_field, sphere_spec, hi_res, radius=2)
        band = boundary_band(naive.mask, int(round(2 * 192 / 96)))
        assert np.array_equal(aware.depth[~band], naive.depth[~band])

    def test_boundary_aware_beats_bilinear_in_band(self, low_depth, sphere_scene, sphere_hull, sphere_field, sphere_spec):
        hi_res = (192, 192)
        hi_cam = low_depth.camera.with_resolution(*hi_res)
        naive = bilinear_upsample_depth(low_depth, hi_cam)
        aware = upsample_boundary_aware(low_depth, sphere_hull, sphere_field, sphere_spec, hi_res, radius=2)
        gt = scenes.gt_render(sphere_scene, hi_cam)
        band = boundary_band(naive.mask, int(round(2 * 192 / 96)))

        def band_error(dm):
            pred_fg = dm.mask & band
            gt_fg = gt.mask & band
            both = pred_fg & gt_fg
            err = np.abs(dm.depth[both] - gt.depth[both]).sum()
            # silhouette disagreements count at a fixed penalty
            return (err + 1.0 * (pred_fg ^ gt_fg).sum()) / band.sum()

        assert band_error(aware) < band_error(naive)

    def test_downscale_rejected(self, low_depth, sphere_hull, sphere_field, sphere_spec):
        with pytest.raises(ConfigError):
            upsample_boundary_aware(low_depth, sphere_hull, sphere_field, sphere_spec, (48, 48))
