"""Shared fixtures: the canonical sphere-checker setup is expensive to
build, so rig/masks/hull/field are session-scoped."""

import numpy as np
import pytest

from fvvren import make_rig, scenes
from fvvren.depthrender import SampleSpec
from fvvren.hull import carve, hull_aabb


RIG_RADIUS = 3.0


@pytest.fixture(scope="session")
def sphere_scene():
    return scenes.sphere_checker_scene()


@pytest.fixture(scope="session")
def ring_rig():
    return make_rig(6, RIG_RADIUS)


@pytest.fixture(scope="session")
def sphere_masks(sphere_scene, ring_rig):
    return scenes.gt_masks(sphere_scene, ring_rig)


@pytest.fixture(scope="session")
def sphere_hull(sphere_scene, ring_rig, sphere_masks):
    lo, hi = sphere_scene.aabb()
    return carve(ring_rig, sphere_masks, (lo, hi))


@pytest.fixture(scope="session")
def sphere_field(sphere_scene):
    return scenes.oracle_field(sphere_scene)


@pytest.fixture(scope="session")
def sphere_spec(sphere_hull):
    lo, hi = hull_aabb(sphere_hull)
    return SampleSpec(k=float(np.linalg.norm(hi - lo)) / 256.0)
