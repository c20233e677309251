"""Edge-aware semi-global aggregation, winner selection and depth post-processing."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import DimensionMismatch
from .geometry import CameraIntrinsics, PlaneStack, pixel_rays
from .matching import CostVolume

INVALID_INDEX = -1

# (dx, dy) of the step from predecessor to pixel; summation follows this order
DIRECTIONS = (
    (1, 0),    # W -> E
    (-1, 0),   # E -> W
    (0, 1),    # N -> S
    (0, -1),   # S -> N
    (1, 1),    # NW -> SE
    (-1, -1),  # SE -> NW
    (-1, 1),   # NE -> SW
    (1, -1),   # SW -> NE
)


@dataclass(frozen=True)
class SgmParams:
    p1: float = 5.0
    p2: float = 50.0
    paths: int = 8

    def __post_init__(self):
        if not (0 <= self.p1 <= self.p2):
            raise ValueError(f"penalties must satisfy 0 <= p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.paths != 8:
            raise ValueError("only 8-path aggregation is supported")


@dataclass(eq=False)
class PlaneIndexMap:
    index: np.ndarray  # (H, W) int32, INVALID_INDEX where undetermined
    origin: tuple = (0, 0)

    @property
    def valid(self) -> np.ndarray:
        return self.index != INVALID_INDEX

    @property
    def width(self) -> int:
        return self.index.shape[1]

    @property
    def height(self) -> int:
        return self.index.shape[0]


@dataclass(eq=False)
class DepthMap:
    """Depth in meters along the optical axis; invalid pixels hold +inf."""

    depth: np.ndarray
    origin: tuple = (0, 0)

    @classmethod
    def invalid(cls, width: int, height: int, origin=(0, 0)) -> "DepthMap":
        return cls(np.full((height, width), np.inf, dtype=np.float32), origin)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


def _mask_bits(mask, shape) -> np.ndarray:
    if mask is None:
        return np.zeros(shape, dtype=np.bool_)
    bits = np.asarray(getattr(mask, "bits", mask), dtype=np.bool_)
    if bits.shape != shape:
        raise DimensionMismatch(f"line mask {bits.shape[::-1]} does not match volume {shape[::-1]}")
    return bits


def aggregate_direction(cost: np.ndarray, mask, params: SgmParams, direction: tuple) -> np.ndarray:
    """Path costs L_r along one direction for a raw (H, W, D) cost array."""
    cost = np.ascontiguousarray(cost, dtype=np.float32)
    bits = _mask_bits(mask, cost.shape[:2])
    penalty2 = np.where(bits, np.float32(params.p1), np.float32(params.p2)).astype(np.float32)
    out = np.empty_like(cost)
    K.sgm_path(cost, penalty2, np.float32(params.p1), direction[0], direction[1], out)
    return out


def aggregate(volume: CostVolume, mask=None, params: SgmParams = SgmParams(), workers: int = 1) -> CostVolume:
    """Sum of the eight SGM path costs.

    The large-jump penalty for a transition into pixel p drops to ``p1`` where
    the line mask is set at p. Invalid cells enter the recurrence at the
    maximum Census cost and stay flagged invalid.
    """
    cost = volume.filled()
    _mask_bits(mask, cost.shape[:2])

    def run(direction):
        return aggregate_direction(cost, mask, params, direction)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, DIRECTIONS))
    else:
        parts = [run(d) for d in DIRECTIONS]
    total = np.zeros_like(cost)
    for part in parts:
        total += part
    return CostVolume(total, volume.valid, volume.origin)


def winner_take_all(volume: CostVolume) -> PlaneIndexMap:
    """Per-pixel argmin over planes; ties go to the lowest index."""
    cost = np.where(volume.valid, volume.cost, np.float32(np.inf))
    index = np.argmin(cost, axis=2).astype(np.int32)
    index[~volume.valid.any(axis=2)] = INVALID_INDEX
    return PlaneIndexMap(index, volume.origin)


def extract_depth(indices: PlaneIndexMap, stack: PlaneStack, intrinsics: CameraIntrinsics) -> DepthMap:
    """Intersect each pixel's viewing ray with its selected plane."""
    if indices.valid.any() and indices.index.max() >= len(stack):
        raise DimensionMismatch("plane index exceeds the plane stack")
    rays = pixel_rays(indices.width, indices.height, intrinsics, indices.origin)
    denom = rays @ stack.normal
    dist = stack.distances[np.clip(indices.index, 0, None)]
    with np.errstate(divide="ignore", invalid="ignore"):
        depth = dist / denom * rays[..., 2]
    ok = indices.valid & (np.abs(denom) >= 1e-12) & (depth > 0)
    return DepthMap(np.where(ok, depth, np.inf).astype(np.float32), indices.origin)


def median_filter_3x3(depth: DepthMap) -> DepthMap:
    """Median of the valid values in each (border-truncated) 3x3 window."""
    d = depth.depth.astype(np.float64)
    h, w = d.shape
    padded = np.full((h + 2, w + 2), np.nan)
    padded[1:-1, 1:-1] = np.where(np.isfinite(d), d, np.nan)
    stack = np.stack([padded[dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)])
    has = np.isfinite(stack).any(axis=0)
    out = np.full((h, w), np.inf)
    if has.any():
        out[has] = np.nanmedian(stack[:, has], axis=0)
    return DepthMap(out.astype(np.float32), depth.origin)
