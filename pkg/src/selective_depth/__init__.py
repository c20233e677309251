"""Multi-view plane-sweep depth estimation with edge-aware SGM and ROI-selective reconstruction."""

from .edges import LineMask, LineSegment, detect_lines, line_mask, rasterize_mask
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    CameraView,
    PlaneStack,
    SweepPlane,
    depth_from_plane,
    plane_homography,
    projection_matrix,
    sample_planes,
)
from .matching import CostVolume, ImageBundle, Roi, build_cost_volume, census_transform, hamming_cost, warp_image
from .pipeline import PipelineConfig, TimingReport, rescale_inputs, run, select_bundle
from .roi import DetectionBox, fuse_selective_depth, iou, soft_nms
from .sgm import DepthMap, PlaneIndexMap, SgmParams, aggregate, extract_depth, median_filter_3x3, winner_take_all

__version__ = "0.1.0"
