"""End-to-end depth estimation for one five-image bundle, full-frame or ROI-selective."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import cv2
import numpy as np

from .edges import EDGE_PROVIDERS, LineMask, line_mask
from .errors import DegenerateSize, OutOfRange
from .geometry import CameraView, PlaneStack, sample_planes
from .matching import CostVolume, ImageBundle, Roi, build_cost_volumes
from .roi import DetectionBox, fuse_selective_depth, soft_nms
from .sgm import DepthMap, SgmParams, aggregate, extract_depth, median_filter_3x3, winner_take_all

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    d_min: float
    d_max: float
    plane_count: int = 128
    p1: float = 5.0
    p2: float = 50.0
    scale: float = 0.5
    overlap_threshold: float = 0.3
    score_cutoff: float = 0.8
    selective: bool = False
    edge_provider: str = "lsd"
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.scale <= 1:
            raise ValueError(f"scale must lie in (0, 1], got {self.scale}")
        if self.plane_count < 2:
            raise ValueError("plane_count must be at least 2")
        if self.edge_provider not in EDGE_PROVIDERS:
            raise ValueError(f"edge provider must be one of {EDGE_PROVIDERS}")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        SgmParams(self.p1, self.p2)
        sample_planes(self.d_min, self.d_max, 2)

    @property
    def sgm(self) -> SgmParams:
        return SgmParams(self.p1, self.p2)

    def stack(self) -> PlaneStack:
        return sample_planes(self.d_min, self.d_max, self.plane_count)


@dataclass
class TimingReport:
    stages: list = field(default_factory=list)  # (name, ms)
    total_ms: float = 0.0
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def stage_ms(self, name: str) -> float:
        return sum(ms for n, ms in self.stages if n == name)

    def as_dict(self) -> dict:
        return {
            "stages": [{"name": n, "ms": ms} for n, ms in self.stages],
            "total_ms": self.total_ms,
            "warnings": self.warnings,
            "details": self.details,
        }


class _Clock:
    def __init__(self, report: TimingReport):
        self.report = report

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.report.stages.append((name, 1e3 * (time.perf_counter() - t0)))


def select_bundle(sequence: list, center_index: int) -> ImageBundle:
    """Reference = frame[center]; two frames on either side as matching images."""
    if not 2 <= center_index <= len(sequence) - 3:
        raise OutOfRange(f"center index {center_index} needs two frames on each side (sequence length {len(sequence)})")
    s = sequence
    c = center_index
    return ImageBundle(s[c], (s[c - 2], s[c - 1]), (s[c + 1], s[c + 2]))


def rescale_inputs(bundle: ImageBundle, rois: list, config: PipelineConfig) -> tuple[ImageBundle, list]:
    """Area-average images to the processing scale and rescale intrinsics and boxes alike."""
    if not 0 < config.scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {config.scale}")
    if config.scale == 1:
        return bundle, list(rois)
    w, h = bundle.width, bundle.height
    nw, nh = int(round(w * config.scale)), int(round(h * config.scale))
    if nw < 9 or nh < 7:
        raise DegenerateSize(f"scaled size {nw}x{nh} is below the 9x7 Census window")
    sx, sy = nw / w, nh / h
    intr = bundle.reference.intrinsics.scaled(sx, sy)

    def shrink(view: CameraView) -> CameraView:
        img = np.asarray(view.image)
        small = cv2.resize(img.astype(np.float32), (nw, nh), interpolation=cv2.INTER_AREA)
        return CameraView(intr, view.pose, small)

    new = ImageBundle(shrink(bundle.reference), [shrink(v) for v in bundle.before], [shrink(v) for v in bundle.after])
    boxes = [
        dataclasses.replace(
            b,
            x0=float(math.floor(b.x0 * sx)), y0=float(math.floor(b.y0 * sy)),
            x1=float(math.ceil(b.x1 * sx)), y1=float(math.ceil(b.y1 * sy)),
        )
        for b in rois
    ]
    return new, boxes


def _clip_box(box: DetectionBox, w: int, h: int) -> DetectionBox | None:
    x0, y0, x1, y1 = box.pixel_extent()
    x0, y0, x1, y1 = max(x0, 0), max(y0, 0), min(x1, w), min(y1, h)
    if x0 >= x1 or y0 >= y1:
        return None
    return dataclasses.replace(box, x0=float(x0), y0=float(y0), x1=float(x1), y1=float(y1))


def depth_from_volume(
    volume: CostVolume, mask: LineMask, stack: PlaneStack, bundle: ImageBundle, config: PipelineConfig, clock=None
) -> DepthMap:
    """SGM, winner selection, ray-plane depth and median filter for one volume."""
    clock = clock or _Clock(TimingReport())
    roi = volume.roi
    with clock.stage("sgm"):
        agg = aggregate(volume, mask.crop(roi.x0, roi.y0, roi.x1, roi.y1), config.sgm, workers=config.workers)
    with clock.stage("wta"):
        idx = winner_take_all(agg)
    with clock.stage("depth"):
        depth = extract_depth(idx, stack, bundle.reference.intrinsics)
    with clock.stage("median"):
        return median_filter_3x3(depth)


def run(bundle: ImageBundle, rois: list, config: PipelineConfig, mask: LineMask | None = None):
    """Depth map of the bundle's reference view plus a per-stage timing report.

    Full mode reconstructs the whole frame. Selective mode applies Soft-NMS and
    the score cutoff to ``rois``, then matches and optimizes each surviving box
    on its own, sharing one set of full-image warps, and fuses the fragments.
    ``mask`` overrides the configured edge provider.
    """
    report = TimingReport()
    clock = _Clock(report)
    t_start = time.perf_counter()
    w, h = bundle.width, bundle.height
    stack = config.stack()

    with clock.stage("edges"):
        if mask is None:
            mask = line_mask(bundle.reference.image, config.edge_provider)

    if not config.selective:
        with clock.stage("cost_volume"):
            (vol,) = build_cost_volumes(bundle, stack, [Roi(0, 0, w, h)], workers=config.workers)
        report.details.update(vol.timings)
        result = depth_from_volume(vol, mask, stack, bundle, config, clock)
    else:
        with clock.stage("nms"):
            kept = soft_nms(rois, config.overlap_threshold, config.score_cutoff)
            boxes = [b for b in (_clip_box(b, w, h) for b in kept) if b is not None]
        report.details["boxes"] = [dataclasses.asdict(b) for b in boxes]
        if not boxes:
            msg = "selective mode: no ROI survived Soft-NMS and the score cutoff"
            log.warning(msg)
            report.warnings.append({"code": "no_rois", "message": msg})
            result = DepthMap.invalid(w, h)
        else:
            regions = [Roi(*b.pixel_extent()) for b in boxes]
            with clock.stage("cost_volume"):
                vols = build_cost_volumes(bundle, stack, regions, workers=config.workers)
            report.details.update(vols[0].timings)
            fragments = [depth_from_volume(v, mask, stack, bundle, config, clock) for v in vols]
            with clock.stage("fuse"):
                result = fuse_selective_depth(list(zip(boxes, fragments)), w, h)

    report.total_ms = 1e3 * (time.perf_counter() - t_start)
    return result, report


def matching_and_sgm_ms(report: TimingReport) -> float:
    return report.stage_ms("cost_volume") + report.stage_ms("sgm")
