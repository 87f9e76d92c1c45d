"""fvvren: free-viewpoint rendering from a sparse calibrated camera ring.

Pipeline: silhouette carving -> implicit-occupancy depth in the novel
view -> two-view warping, occlusion-aware blending, boundary-aware
upsampling, and normal-driven depth refinement.
"""

from . import errors
from .cameras import Camera, CameraRig, Ray, load_rig, make_rig, orbit_camera, save_rig
from .depthrender import DepthMap, SampleSpec, render_depth
from .fields import AnalyticOccupancyField, MlpWeights, MultiViewMlpField, load_mlp, save_mlp
from .hull import SilhouetteMask, VoxelHull, carve, hull_aabb, ray_hull_interval
from .kernels import BACKEND as KERNEL_BACKEND
from .pipeline import FrameContext, PipelineConfig, build_context, run_frame
from .scenes import AnalyticScene, gt_render, load_scene, oracle_field, save_scene

__version__ = "0.1.0"
