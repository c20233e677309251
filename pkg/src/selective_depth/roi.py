"""Detection boxes: overlap, Soft-NMS and fusion of per-box depth fragments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import FragmentMismatch
from .sgm import DepthMap


@dataclass(frozen=True)
class DetectionBox:
    x0: float
    y0: float
    x1: float
    y1: float
    score: float
    label: str = "building"

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box ({self.x0}, {self.y0}, {self.x1}, {self.y1})")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def pixel_extent(self) -> tuple[int, int, int, int]:
        """Integer pixel rectangle [x0, x1) x [y0, y1) covered by the box."""
        return int(np.floor(self.x0)), int(np.floor(self.y0)), int(np.ceil(self.x1)), int(np.ceil(self.y1))


def iou(a: DetectionBox, b: DetectionBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def soft_nms(
    boxes: list,
    overlap_threshold: float = 0.3,
    score_cutoff: float = 0.0,
    decay: str = "linear",
) -> list:
    """Greedy Soft-NMS.

    Each round picks the highest-scoring remaining box M (earliest input on
    ties) and rescales every other remaining box b with IoU(M, b) >= threshold:
    by ``1 - IoU`` for linear decay, to zero for ``decay="rectangular"``
    (classic NMS). Boxes scoring below ``score_cutoff`` afterwards are dropped.
    """
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ValueError("overlap threshold must lie in [0, 1]")
    if decay not in ("linear", "rectangular"):
        raise ValueError(f"unknown decay {decay!r}")
    scores = [b.score for b in boxes]
    remaining = list(range(len(boxes)))
    picked = []
    while remaining:
        m = max(remaining, key=lambda i: (scores[i], -i))
        remaining.remove(m)
        picked.append(m)
        for i in remaining:
            o = iou(boxes[m], boxes[i])
            if o >= overlap_threshold:
                scores[i] = scores[i] * (1.0 - o) if decay == "linear" else 0.0
    kept = [i for i in picked if scores[i] >= score_cutoff]
    kept.sort(key=lambda i: (-scores[i], i))
    return [dataclasses.replace(boxes[i], score=scores[i]) for i in kept]


def fuse_selective_depth(rois: list, width: int, height: int) -> DepthMap:
    """Paste per-box depth fragments into one full-frame map.

    Where boxes overlap, the higher-scoring box owns the pixel; equal scores
    keep list order. Pixels outside every box are invalid.
    """
    out = np.full((height, width), np.inf, dtype=np.float32)
    order = sorted(range(len(rois)), key=lambda i: (-rois[i][0].score, i))
    for i in reversed(order):
        box, frag = rois[i]
        x0, y0, x1, y1 = box.pixel_extent()
        if frag.depth.shape != (y1 - y0, x1 - x0):
            raise FragmentMismatch(
                f"fragment {frag.depth.shape[::-1]} does not match box extent {(x1 - x0, y1 - y0)}"
            )
        cx0, cy0, cx1, cy1 = max(x0, 0), max(y0, 0), min(x1, width), min(y1, height)
        if cx0 >= cx1 or cy0 >= cy1:
            continue
        out[cy0:cy1, cx0:cx1] = frag.depth[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    return DepthMap(out)
