"""facademap: street-level facade mapping from laser, image, and map data.

The pipeline segments a georeferenced street point cloud on a planimetric
accumulation grid, fuses the vertical-structure points with a 2D building
map to extract per-facade clusters, fits 3D facade quadrilaterals, detects
the points occluding each facade, turns them into per-image masks, and
mosaics multi-view ortho-rectified images into occlusion-free facade
textures with explicit hole maps. A built-in scene simulator provides
ground truth for desk-scale verification.
"""

from .accumulation import AccumulationGrid, build_accumulation_map, split_hyper_points
from .clusters import FacadeCluster, extract_facade_clusters
from .dataset import Dataset, LaserFrame, PipelineConfig, PointRecord, load_config, load_dataset
from .facades import build_facade_quad, fit_vertical_plane
from .geometry import (
    FacadeQuad,
    PinholeCamera,
    Point3,
    RigidPose,
    Segment2,
    VerticalPlane,
    project_to_image,
    segment_frame_coords,
    signed_plane_distance,
)
from .masks import disc_dilate, disc_erode, feather_contours, rasterize_points
from .occlusion import OccluderSet, cube_dilate, detect_occluding_points
from .pipeline import RunManifest, evaluate_run, run_pipeline
from .simulator import SceneSpec, load_scene, simulate_laser, simulate_scene_file
from .texturing import OrthoFrame, OrthoGrid, gray_world_balance, mosaic, rectify_view

__version__ = "0.1.0"
