"""Compiled inner loops. All kernels release the GIL so callers can fan out over threads."""

import numba as nb
import numpy as np

CENSUS_W = 9
CENSUS_H = 7
CENSUS_BITS = CENSUS_W * CENSUS_H - 1

_jit = nb.njit(cache=True, nogil=True)


@_jit
def popcount64(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


@_jit
def hamming_map(a, b, out):
    h, w = a.shape
    for y in range(h):
        for x in range(w):
            out[y, x] = popcount64(a[y, x] ^ b[y, x])


@_jit
def census(img, pix_valid, x0, y0, x1, y1, desc, valid):
    """Census descriptors for pixels in [x0, x1) x [y0, y1) of ``img``.

    A descriptor is valid when its whole window lies inside the image and
    every window pixel is flagged in ``pix_valid``.
    """
    h, w = img.shape
    rx = CENSUS_W // 2
    ry = CENSUS_H // 2
    # running count of invalid pixels per column strip of window height
    bad_col = np.zeros(w, dtype=np.int32)
    for y in range(y0, y1):
        oy = y - y0
        inside_y = y >= ry and y + ry < h
        if inside_y:
            for x in range(max(x0 - rx, 0), min(x1 + rx, w)):
                n = 0
                for dy in range(-ry, ry + 1):
                    if not pix_valid[y + dy, x]:
                        n += 1
                bad_col[x] = n
        for x in range(x0, x1):
            ox = x - x0
            if not inside_y or x < rx or x + rx >= w:
                desc[oy, ox] = 0
                valid[oy, ox] = False
                continue
            nbad = 0
            for dx in range(-rx, rx + 1):
                nbad += bad_col[x + dx]
            c = img[y, x]
            bits = np.uint64(0)
            k = np.uint64(0)
            for dy in range(-ry, ry + 1):
                row = y + dy
                for dx in range(-rx, rx + 1):
                    if dx == 0 and dy == 0:
                        continue
                    bits |= np.uint64(img[row, x + dx] < c) << k
                    k += np.uint64(1)
            desc[oy, ox] = bits
            valid[oy, ox] = nbad == 0


@_jit
def warp_bilinear(src, H, out, valid):
    """out[y, x] = src sampled at H @ (x, y, 1); all four taps must be in bounds."""
    sh, sw = src.shape
    oh, ow = out.shape
    for y in range(oh):
        for x in range(ow):
            wz = H[2, 0] * x + H[2, 1] * y + H[2, 2]
            if wz <= 0.0:
                out[y, x] = 0.0
                valid[y, x] = False
                continue
            u = (H[0, 0] * x + H[0, 1] * y + H[0, 2]) / wz
            v = (H[1, 0] * x + H[1, 1] * y + H[1, 2]) / wz
            if not (u >= 0.0 and v >= 0.0 and u <= sw - 1 and v <= sh - 1):
                out[y, x] = 0.0
                valid[y, x] = False
                continue
            # last row/column: step the base tap inward so both taps stay in bounds
            ix = min(int(np.floor(u)), sw - 2) if sw > 1 else 0
            iy = min(int(np.floor(v)), sh - 2) if sh > 1 else 0
            fx = u - ix
            fy = v - iy
            ix1 = ix + 1 if sw > 1 else ix
            iy1 = iy + 1 if sh > 1 else iy
            top = src[iy, ix] * (1.0 - fx) + src[iy, ix1] * fx
            bot = src[iy1, ix] * (1.0 - fx) + src[iy1, ix1] * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
            valid[y, x] = True


@_jit
def sgm_path(cost, penalty2, p1, dx, dy, out):
    """Accumulate one SGM path direction into ``out`` (same shape as ``cost``).

    ``penalty2[y, x]`` is the large-jump penalty for transitions into (x, y).
    """
    h, w, d = cost.shape
    prev = np.empty(d, dtype=np.float32)
    ys = range(h) if dy >= 0 else range(h - 1, -1, -1)
    xs0 = 0 if dx >= 0 else w - 1
    xstep = 1 if dx >= 0 else -1
    for y in ys:
        x = xs0
        for _ in range(w):
            qx = x - dx
            qy = y - dy
            if qx < 0 or qy < 0 or qx >= w or qy >= h:
                for i in range(d):
                    out[y, x, i] = cost[y, x, i]
            else:
                mprev = out[qy, qx, 0]
                for i in range(d):
                    prev[i] = out[qy, qx, i]
                    if prev[i] < mprev:
                        mprev = prev[i]
                jump = mprev + penalty2[y, x]
                for i in range(d):
                    best = prev[i]
                    if i > 0 and prev[i - 1] + p1 < best:
                        best = prev[i - 1] + p1
                    if i < d - 1 and prev[i + 1] + p1 < best:
                        best = prev[i + 1] + p1
                    if jump < best:
                        best = jump
                    out[y, x, i] = cost[y, x, i] + best - mprev
            x += xstep


NOTDEF = -1024.0


@_jit
def angle_diff(a, b):
    d = a - b
    while d <= -np.pi:
        d += 2.0 * np.pi
    while d > np.pi:
        d -= 2.0 * np.pi
    return abs(d)


@_jit
def region_grow(angles, used, sx, sy, prec, reg_x, reg_y):
    """Grow an 8-connected region of level-line angles aligned with its running mean.

    Pixels added are marked in ``used``. Returns (size, region angle).
    """
    h, w = angles.shape
    reg_x[0] = sx
    reg_y[0] = sy
    size = 1
    reg_angle = angles[sy, sx]
    sumdx = np.cos(reg_angle)
    sumdy = np.sin(reg_angle)
    used[sy, sx] = 1
    i = 0
    while i < size:
        px = reg_x[i]
        py = reg_y[i]
        for yy in range(py - 1, py + 2):
            for xx in range(px - 1, px + 2):
                if xx < 0 or yy < 0 or xx >= w or yy >= h:
                    continue
                if used[yy, xx] != 0:
                    continue
                a = angles[yy, xx]
                if a == NOTDEF:
                    continue
                if angle_diff(a, reg_angle) <= prec:
                    used[yy, xx] = 1
                    reg_x[size] = xx
                    reg_y[size] = yy
                    size += 1
                    sumdx += np.cos(a)
                    sumdy += np.sin(a)
                    reg_angle = np.arctan2(sumdy, sumdx)
        i += 1
    return size, reg_angle
