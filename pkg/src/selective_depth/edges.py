"""Binary line images from a simplified a-contrario line segment detector.

The detector follows the usual LSD stages with its default settings:
Gaussian subsampling to 80 %, level-line angles from a 2x2 gradient,
region growing at 22.5 degrees tolerance, rectangle fitting with density
refinement and NFA validation at epsilon = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, stats

from . import _kernels as K

NOTDEF = K.NOTDEF


@dataclass(frozen=True)
class LsdParams:
    scale: float = 0.8
    sigma_scale: float = 0.6
    quant: float = 2.0
    ang_th: float = 22.5
    log_eps: float = 0.0
    density_th: float = 0.7


@dataclass(frozen=True)
class LineSegment:
    p0: tuple
    p1: tuple
    width: float = 1.0

    def __post_init__(self):
        if tuple(self.p0) == tuple(self.p1):
            raise ValueError("segment endpoints coincide")
        object.__setattr__(self, "p0", (float(self.p0[0]), float(self.p0[1])))
        object.__setattr__(self, "p1", (float(self.p1[0]), float(self.p1[1])))

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))


@dataclass(eq=False)
class LineMask:
    bits: np.ndarray  # (H, W) bool

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @classmethod
    def empty(cls, width: int, height: int) -> "LineMask":
        return cls(np.zeros((height, width), dtype=np.bool_))

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> "LineMask":
        return LineMask(self.bits[y0:y1, x0:x1].copy())


@dataclass
class _Rect:
    x1: float
    y1: float
    x2: float
    y2: float
    width: float
    x: float
    y: float
    theta: float
    prec: float
    p: float

    @property
    def length(self) -> float:
        return float(np.hypot(self.x2 - self.x1, self.y2 - self.y1))


def _gaussian_subsample(img: np.ndarray, scale: float, sigma_scale: float) -> np.ndarray:
    if scale == 1.0:
        return img
    sigma = sigma_scale / scale
    blurred = ndimage.gaussian_filter(img, sigma, mode="nearest")
    h, w = img.shape
    nh, nw = int(np.ceil(h * scale)), int(np.ceil(w * scale))
    ys, xs = np.mgrid[0:nh, 0:nw]
    coords = np.stack([ys / scale, xs / scale])
    return ndimage.map_coordinates(blurred, coords, order=1, mode="nearest")


def _level_line_angles(img: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    h, w = img.shape
    angles = np.full((h, w), NOTDEF)
    mag = np.zeros((h, w))
    if h < 2 or w < 2:
        return angles, mag
    com1 = img[1:, 1:] - img[:-1, :-1]
    com2 = img[:-1, 1:] - img[1:, :-1]
    gx = com1 + com2
    gy = com1 - com2
    norm = np.sqrt((gx * gx + gy * gy) / 4.0)
    mag[:-1, :-1] = norm
    ang = np.arctan2(gx, -gy)
    angles[:-1, :-1] = np.where(norm <= threshold, NOTDEF, ang)
    return angles, mag


def _region_to_rect(xs, ys, mag, reg_angle, prec, p) -> _Rect:
    m = mag[ys, xs]
    total = m.sum()
    cx = float((m * xs).sum() / total)
    cy = float((m * ys).sum() / total)
    ddx, ddy = xs - cx, ys - cy
    ixx = float((m * ddy * ddy).sum())
    iyy = float((m * ddx * ddx).sum())
    ixy = float(-(m * ddx * ddy).sum())
    lam = 0.5 * (ixx + iyy - np.sqrt((ixx - iyy) ** 2 + 4.0 * ixy * ixy))
    if abs(ixx) > abs(iyy):
        theta = np.arctan2(lam - ixx, ixy)
    else:
        theta = np.arctan2(ixy, lam - iyy)
    if K.angle_diff(theta, reg_angle) > prec:
        theta += np.pi
    dx, dy = np.cos(theta), np.sin(theta)
    along = ddx * dx + ddy * dy
    across = -ddx * dy + ddy * dx
    lmin, lmax = float(along.min()), float(along.max())
    wmin, wmax = float(across.min()), float(across.max())
    return _Rect(
        cx + lmin * dx, cy + lmin * dy, cx + lmax * dx, cy + lmax * dy,
        max(wmax - wmin, 1.0), cx, cy, float(theta), prec, p,
    )


def _rect_log_nfa(rect: _Rect, angles: np.ndarray, log_nt: float) -> float:
    h, w = angles.shape
    dx, dy = np.cos(rect.theta), np.sin(rect.theta)
    half = rect.width / 2.0
    corners_x = [rect.x1 - dy * half, rect.x1 + dy * half, rect.x2 - dy * half, rect.x2 + dy * half]
    corners_y = [rect.y1 + dx * half, rect.y1 - dx * half, rect.y2 + dx * half, rect.y2 - dx * half]
    x0 = max(int(np.floor(min(corners_x))), 0)
    x1 = min(int(np.ceil(max(corners_x))), w - 1)
    y0 = max(int(np.floor(min(corners_y))), 0)
    y1 = min(int(np.ceil(max(corners_y))), h - 1)
    if x0 > x1 or y0 > y1:
        return -np.inf
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    rx, ry = xs - rect.x1, ys - rect.y1
    along = rx * dx + ry * dy
    across = -rx * dy + ry * dx - ((rect.x - rect.x1) * -dy + (rect.y - rect.y1) * dx)
    inside = (along >= 0) & (along <= rect.length) & (np.abs(across) <= half)
    a = angles[ys[inside], xs[inside]]
    n = int(inside.sum())
    if n == 0:
        return -np.inf
    diff = np.abs((a - rect.theta + np.pi) % (2.0 * np.pi) - np.pi)
    k = int(((a != NOTDEF) & (diff <= rect.prec)).sum())
    return _log_nfa(n, k, rect.p, log_nt)


def _log_nfa(n: int, k: int, p: float, log_nt: float) -> float:
    """-log10 of the number of false alarms for k aligned pixels out of n."""
    if k == 0:
        return -log_nt
    tail = stats.binom.logsf(k - 1, n, p) / np.log(10.0)
    return float(-log_nt - tail)


def _improve(rect: _Rect, angles, log_nt, log_eps) -> tuple[_Rect, float]:
    best = rect
    best_nfa = _rect_log_nfa(rect, angles, log_nt)
    if best_nfa > log_eps:
        return best, best_nfa
    r = _Rect(**vars(best))
    for _ in range(5):
        r.p /= 2.0
        r.prec = r.p * np.pi
        v = _rect_log_nfa(r, angles, log_nt)
        if v > best_nfa:
            best, best_nfa = _Rect(**vars(r)), v
    if best_nfa > log_eps:
        return best, best_nfa
    r = _Rect(**vars(best))
    for _ in range(5):
        if r.width - 0.5 < 0.5:
            break
        r.width -= 0.5
        v = _rect_log_nfa(r, angles, log_nt)
        if v > best_nfa:
            best, best_nfa = _Rect(**vars(r)), v
    return best, best_nfa


def _density(size: int, rect: _Rect) -> float:
    return size / max(rect.length * rect.width, 1e-12)


def detect_lines(image, params: LsdParams = LsdParams()) -> list:
    """Straight line segments of ``image`` in input pixel coordinates.

    Deterministic; an image without coherent gradients yields no segments.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    img = _gaussian_subsample(img, params.scale, params.sigma_scale)
    h, w = img.shape
    prec = np.deg2rad(params.ang_th)
    p = params.ang_th / 180.0
    rho = params.quant / np.sin(prec)
    angles, mag = _level_line_angles(img, rho)
    log_nt = 5.0 * (np.log10(w) + np.log10(h)) / 2.0 + np.log10(11.0)
    min_size = int(-log_nt / np.log10(p))

    used = np.zeros((h, w), dtype=np.uint8)
    reg_x = np.empty(h * w, dtype=np.int64)
    reg_y = np.empty(h * w, dtype=np.int64)
    order = np.argsort(-mag, axis=None, kind="stable")
    segments = []
    for flat in order:
        sy, sx = divmod(int(flat), w)
        if mag[sy, sx] <= rho:
            break
        if used[sy, sx] or angles[sy, sx] == NOTDEF:
            continue
        size, reg_angle = K.region_grow(angles, used, sx, sy, prec, reg_x, reg_y)
        if size < min_size:
            continue
        xs, ys = reg_x[:size].copy(), reg_y[:size].copy()
        rect = _region_to_rect(xs, ys, mag, reg_angle, prec, p)
        if _density(size, rect) < params.density_th:
            refined = _refine(xs, ys, sx, sy, rect, reg_angle, angles, mag, used, prec, p, params.density_th)
            if refined is None:
                continue
            xs, ys, rect = refined
        rect, log_nfa = _improve(rect, angles, log_nt, params.log_eps)
        if log_nfa <= params.log_eps:
            continue
        x1, y1, x2, y2 = rect.x1 + 0.5, rect.y1 + 0.5, rect.x2 + 0.5, rect.y2 + 0.5
        s = params.scale
        if (x1, y1) == (x2, y2):
            continue
        segments.append(LineSegment((x1 / s, y1 / s), (x2 / s, y2 / s), rect.width / s))
    return segments


def _refine(xs, ys, sx, sy, rect, reg_angle, angles, mag, used, prec, p, density_th):
    """Re-grow with a tolerance fitted near the seed, then shrink the region radius."""
    near = np.hypot(xs - sx, ys - sy) < rect.width
    diffs = (angles[ys[near], xs[near]] - angles[sy, sx] + np.pi) % (2.0 * np.pi) - np.pi
    if near.sum() > 0:
        mean = diffs.mean()
        tau = 2.0 * np.sqrt(max((diffs ** 2).mean() - mean * mean, 0.0) + mean * mean)
        used[ys, xs] = 0
        reg_x = np.empty(angles.size, dtype=np.int64)
        reg_y = np.empty(angles.size, dtype=np.int64)
        size, reg_angle = K.region_grow(angles, used, sx, sy, tau, reg_x, reg_y)
        xs, ys = reg_x[:size].copy(), reg_y[:size].copy()
        if size < 2:
            return None
        rect = _region_to_rect(xs, ys, mag, reg_angle, prec, p)
        if _density(size, rect) >= density_th:
            return xs, ys, rect
    return _reduce_radius(xs, ys, sx, sy, rect, reg_angle, mag, prec, p, density_th)


def _reduce_radius(xs, ys, sx, sy, rect, reg_angle, mag, prec, p, density_th):
    dist = np.hypot(xs - sx, ys - sy)
    rad = max(np.hypot(rect.x1 - sx, rect.y1 - sy), np.hypot(rect.x2 - sx, rect.y2 - sy))
    while _density(len(xs), rect) < density_th:
        rad *= 0.75
        keep = dist <= rad
        xs, ys, dist = xs[keep], ys[keep], dist[keep]
        if len(xs) < 2:
            return None
        rect = _region_to_rect(xs, ys, mag, reg_angle, prec, p)
    return xs, ys, rect


def _clip_segment(x0, y0, x1, y1, xmin, ymin, xmax, ymax):
    """Liang-Barsky clipping; returns None when the segment misses the box."""
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0:
            if q < 0:
                return None
            continue
        t = q / p
        if p < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return x0 + t0 * dx, y0 + t0 * dy, x0 + t1 * dx, y0 + t1 * dy


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list:
    pts = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize_mask(segments: list, width: int, height: int) -> LineMask:
    """Mark pixels covered by each segment, widened to its width (at least 1 px)."""
    if width <= 0 or height <= 0:
        raise ValueError("mask dimensions must be positive")
    bits = np.zeros((height, width), dtype=np.bool_)
    for seg in segments:
        (ax, ay), (bx, by) = seg.p0, seg.p1
        nx, ny = -(by - ay), bx - ax
        norm = np.hypot(nx, ny)
        nx, ny = nx / norm, ny / norm
        wpx = max(int(round(seg.width)), 1)
        offsets = np.arange(wpx) - (wpx - 1) / 2.0
        for off in offsets:
            clipped = _clip_segment(
                ax + off * nx, ay + off * ny, bx + off * nx, by + off * ny,
                -0.5, -0.5, width - 0.5, height - 0.5,
            )
            if clipped is None:
                continue
            cx0, cy0, cx1, cy1 = (int(np.floor(v + 0.5)) for v in clipped)
            for x, y in bresenham(cx0, cy0, cx1, cy1):
                if 0 <= x < width and 0 <= y < height:
                    bits[y, x] = True
    return LineMask(bits)


def gradient_mask(image, threshold: float = 0.2) -> LineMask:
    """Pixels whose Sobel magnitude exceeds ``threshold`` times the image maximum."""
    img = np.asarray(image, dtype=np.float64)
    mag = np.hypot(ndimage.sobel(img, axis=1), ndimage.sobel(img, axis=0))
    peak = mag.max()
    if peak == 0:
        return LineMask(np.zeros(img.shape, dtype=np.bool_))
    return LineMask(mag > threshold * peak)


EDGE_PROVIDERS = ("lsd", "gradient", "none")


def line_mask(
    image, provider: str = "lsd", lsd_params: LsdParams = LsdParams(), line_width: float | None = 1.0
) -> LineMask:
    """Binary line image of ``image``.

    LSD segments are drawn at ``line_width`` pixels (their centre lines by
    default); ``line_width=None`` keeps each segment's detected region width.
    """
    img = np.asarray(image)
    h, w = img.shape
    if provider == "lsd":
        segments = detect_lines(img, lsd_params)
        if line_width is not None:
            segments = [LineSegment(s.p0, s.p1, line_width) for s in segments]
        return rasterize_mask(segments, w, h)
    if provider == "gradient":
        return gradient_mask(img)
    if provider == "none":
        return LineMask.empty(w, h)
    raise ValueError(f"unknown edge provider {provider!r}, expected one of {EDGE_PROVIDERS}")
