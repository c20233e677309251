"""Plane-sweep matching: warping, Census dissimilarity and cost-volume assembly."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DimensionMismatch, EmptyRoi, ImageTooSmall, NumericalDegeneracy
from .geometry import CameraView, PlaneStack, plane_homography

CENSUS_BITS = K.CENSUS_BITS
MAX_COST = float(CENSUS_BITS)
# widest reach of a Census window from its center pixel
MARGIN_X = K.CENSUS_W // 2
MARGIN_Y = K.CENSUS_H // 2


@dataclass(frozen=True, eq=False)
class ImageBundle:
    reference: CameraView
    before: tuple  # (I_ref-2, I_ref-1)
    after: tuple   # (I_ref+1, I_ref+2)

    def __post_init__(self):
        object.__setattr__(self, "before", tuple(self.before))
        object.__setattr__(self, "after", tuple(self.after))
        if len(self.before) != 2 or len(self.after) != 2:
            raise ValueError("a bundle holds exactly two views on either side of the reference")
        shape = self.reference.image.shape
        for v in self.views:
            if v.image.shape != shape:
                raise DimensionMismatch("all bundle images must share one size")
            if v.intrinsics != self.reference.intrinsics:
                raise DimensionMismatch("all bundle views must share intrinsics")

    @property
    def views(self) -> tuple:
        return (*self.before, self.reference, *self.after)

    @property
    def width(self) -> int:
        return self.reference.width

    @property
    def height(self) -> int:
        return self.reference.height


@dataclass(frozen=True)
class Roi:
    """Pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return max(self.width, 0) * max(self.height, 0)

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


@dataclass(eq=False)
class CostVolume:
    """Per-pixel, per-plane dissimilarity, stored as (H, W, D).

    ``origin`` is the image position of cell (0, 0) when the volume covers an ROI.
    """

    cost: np.ndarray
    valid: np.ndarray
    origin: tuple = (0, 0)
    timings: dict = field(default_factory=dict, repr=False)

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def planes(self) -> int:
        return self.cost.shape[2]

    @property
    def roi(self) -> Roi:
        x0, y0 = self.origin
        return Roi(x0, y0, x0 + self.width, y0 + self.height)

    def filled(self) -> np.ndarray:
        """Cost with invalid cells set to the maximum dissimilarity."""
        return np.where(self.valid, self.cost, np.float32(MAX_COST)).astype(np.float32)

    def crop(self, roi: Roi) -> "CostVolume":
        x0, y0 = self.origin
        sl = (slice(roi.y0 - y0, roi.y1 - y0), slice(roi.x0 - x0, roi.x1 - x0))
        return CostVolume(self.cost[sl].copy(), self.valid[sl].copy(), (roi.x0, roi.y0))


def _as_float_image(image) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a single-channel image")
    return np.ascontiguousarray(img, dtype=np.float32)


def census_transform(image, roi: Roi | None = None, pix_valid=None) -> tuple[np.ndarray, np.ndarray]:
    """9x7 Census descriptors as uint64 plus a validity raster.

    Bit k is set when the k-th non-center window pixel (row-major) is strictly
    darker than the center. Pixels whose window leaves the image are invalid.
    """
    img = _as_float_image(image)
    h, w = img.shape
    if w < K.CENSUS_W or h < K.CENSUS_H:
        raise ImageTooSmall(f"Census needs at least 9x7 pixels, got {w}x{h}")
    roi = roi or Roi(0, 0, w, h)
    if pix_valid is None:
        pix_valid = np.ones((h, w), dtype=np.bool_)
    desc = np.empty((roi.height, roi.width), dtype=np.uint64)
    valid = np.empty((roi.height, roi.width), dtype=np.bool_)
    K.census(img, np.ascontiguousarray(pix_valid, dtype=np.bool_), roi.x0, roi.y0, roi.x1, roi.y1, desc, valid)
    return desc, valid


def hamming_cost(a, b):
    """Number of differing bits. Accepts ints or equally shaped uint64 arrays."""
    if np.ndim(a) == 0 and np.ndim(b) == 0:
        return (int(a) ^ int(b)).bit_count()
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise DimensionMismatch("descriptor rasters differ in shape")
    flat_a, flat_b = a.reshape(1, -1), b.reshape(1, -1)
    out = np.empty(flat_a.shape, dtype=np.uint8)
    K.hamming_map(flat_a, flat_b, out)
    return out.reshape(a.shape)


def warp_image(view, H: np.ndarray, shape: tuple | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Backward-warp ``view`` (CameraView or raster) so output pixel p samples H @ p."""
    src = _as_float_image(view.image if isinstance(view, CameraView) else view)
    H = np.asarray(H, dtype=np.float64)
    if not np.all(np.isfinite(H)) or np.linalg.cond(H) > 1e12:
        raise NumericalDegeneracy("warp homography is singular")
    shape = shape or src.shape
    out = np.empty(shape, dtype=np.float32)
    valid = np.empty(shape, dtype=np.bool_)
    K.warp_bilinear(src, np.ascontiguousarray(H), out, valid)
    return out, valid


def _check_roi(roi: Roi, w: int, h: int) -> None:
    if roi.area <= 0:
        raise EmptyRoi(f"ROI {roi} has zero area")
    if roi.x0 < 0 or roi.y0 < 0 or roi.x1 > w or roi.y1 > h:
        raise ValueError(f"ROI {roi} exceeds image bounds {w}x{h}")


def build_cost_volumes(
    bundle: ImageBundle,
    stack: PlaneStack,
    rois: list,
    workers: int = 1,
    subsets: str = "both",
) -> list:
    """Cost volumes for several ROIs sharing one set of full-image warps.

    Per plane, every matching image is warped over the full reference extent;
    Census matching is evaluated only inside each ROI. Per subset (before /
    after the reference) the Hamming costs of valid warps are averaged and the
    smaller subset mean is stored. ``subsets`` may restrict to "left" or "right".
    """
    w, h = bundle.width, bundle.height
    for roi in rois:
        _check_roi(roi, w, h)
    D = len(stack)
    ref_desc = []
    for roi in rois:
        ref_desc.append(census_transform(bundle.reference.image, roi))
    groups = {"both": (bundle.before, bundle.after), "left": (bundle.before,), "right": (bundle.after,)}[subsets]
    vols = [
        CostVolume(
            np.full((r.height, r.width, D), MAX_COST, dtype=np.float32),
            np.zeros((r.height, r.width, D), dtype=np.bool_),
            (r.x0, r.y0),
        )
        for r in rois
    ]
    sources = [[_as_float_image(v.image) for v in g] for g in groups]
    homs = [[[plane_homography(bundle.reference, v, plane) for v in g] for g in groups] for plane in stack.planes]

    def one_plane(r: int) -> tuple[float, float]:
        t_warp = t_match = 0.0
        sums = [[None] * len(groups) for _ in rois]
        for gi, g in enumerate(sources):
            for vi, src in enumerate(g):
                t0 = time.perf_counter()
                warped, wvalid = warp_image(src, homs[r][gi][vi], (h, w))
                t1 = time.perf_counter()
                for ri, roi in enumerate(rois):
                    desc, dvalid = census_transform(warped, roi, wvalid)
                    rdesc, rvalid = ref_desc[ri]
                    ham = hamming_cost(rdesc, desc).astype(np.float32)
                    ok = dvalid & rvalid
                    acc = sums[ri][gi]
                    if acc is None:
                        acc = sums[ri][gi] = [np.zeros(ham.shape, np.float32), np.zeros(ham.shape, np.int32)]
                    acc[0] += np.where(ok, ham, np.float32(0))
                    acc[1] += ok
                t_match += time.perf_counter() - t1
                t_warp += t1 - t0
        t1 = time.perf_counter()
        for ri, vol in enumerate(vols):
            best = np.full(vol.cost.shape[:2], np.inf, dtype=np.float32)
            for total, count in sums[ri]:
                mean = np.where(count > 0, total / np.maximum(count, 1), np.float32(np.inf)).astype(np.float32)
                best = np.minimum(best, mean)
            ok = np.isfinite(best)
            vol.cost[:, :, r] = np.where(ok, best, np.float32(MAX_COST))
            vol.valid[:, :, r] = ok
        t_match += time.perf_counter() - t1
        return t_warp, t_match

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            times = list(pool.map(one_plane, range(D)))
    else:
        times = [one_plane(r) for r in range(D)]
    for vol in vols:
        vol.timings.update(
            warp_ms=1e3 * sum(t[0] for t in times), match_ms=1e3 * sum(t[1] for t in times)
        )
    return vols


def build_cost_volume(
    bundle: ImageBundle,
    stack: PlaneStack,
    roi: Roi | None = None,
    workers: int = 1,
    subsets: str = "both",
) -> CostVolume:
    roi = roi if roi is not None else Roi(0, 0, bundle.width, bundle.height)
    return build_cost_volumes(bundle, stack, [roi], workers=workers, subsets=subsets)[0]
