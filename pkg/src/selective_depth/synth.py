"""Ray-cast textured planar patches to get image bundles with exact depth."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, CameraPose, CameraView, pixel_rays
from .sgm import DepthMap

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class Patch:
    """Rectangle centred at ``origin`` spanned by orthonormal ``u``/``v`` axes.

    ``half_u``/``half_v`` may be infinite. Intensity is ``base`` plus value
    noise of amplitude ``contrast`` on a lattice of ``cell`` meters.
    """

    origin: tuple
    u: tuple
    v: tuple
    half_u: float = np.inf
    half_v: float = np.inf
    seed: int = 0
    cell: float = 0.05
    base: float = 128.0
    contrast: float = 110.0

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.u, self.v)
        return n / np.linalg.norm(n)


@dataclass(frozen=True)
class SyntheticScene:
    patches: tuple
    poses: tuple
    intrinsics: CameraIntrinsics
    width: int
    height: int
    background: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)


def _hash2(i: np.ndarray, j: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic lattice values in [0, 1) from integer coordinates (splitmix64 finalizer)."""
    with np.errstate(over="ignore"):
        x = (i.astype(np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)) & _MASK64
        x ^= (j.astype(np.int64).astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)) & _MASK64
        x ^= np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x165667B19E3779F9)
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(s: np.ndarray, t: np.ndarray, seed: int, cell: float) -> np.ndarray:
    """Two-octave value noise in [0, 1) at patch coordinates (s, t) in meters."""
    out = np.zeros(np.shape(s))
    weight = 0.0
    for octave, amp in ((1.0, 0.65), (0.5, 0.35)):
        c = cell * octave
        x, y = np.asarray(s) / c, np.asarray(t) / c
        i0, j0 = np.floor(x), np.floor(y)
        fx, fy = x - i0, y - j0
        fx = fx * fx * (3 - 2 * fx)
        fy = fy * fy * (3 - 2 * fy)
        sd = seed * 7919 + int(octave * 1000)
        v00 = _hash2(i0, j0, sd)
        v10 = _hash2(i0 + 1, j0, sd)
        v01 = _hash2(i0, j0 + 1, sd)
        v11 = _hash2(i0 + 1, j0 + 1, sd)
        out += amp * ((v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy)
        weight += amp
    return out / weight


def render(scene: SyntheticScene, view_index: int) -> tuple[np.ndarray, DepthMap]:
    """Intensity image and ground-truth depth seen from ``scene.poses[view_index]``."""
    pose = scene.poses[view_index]
    rays_cam = pixel_rays(scene.width, scene.height, scene.intrinsics)  # z == 1
    dirs = rays_cam @ pose.rotation  # camera -> world: R^T applied per row
    best = np.full((scene.height, scene.width), np.inf)
    image = np.full((scene.height, scene.width), float(scene.background))
    for patch in scene.patches:
        n = patch.normal
        o = np.asarray(patch.origin, dtype=np.float64)
        denom = dirs @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((o - pose.center) @ n) / denom
        hit = pose.center + t[..., None] * dirs
        rel = hit - o
        s_coord = rel @ np.asarray(patch.u, dtype=np.float64)
        t_coord = rel @ np.asarray(patch.v, dtype=np.float64)
        inside = (
            np.isfinite(t) & (t > 0)
            & (np.abs(s_coord) <= patch.half_u) & (np.abs(t_coord) <= patch.half_v)
        )
        closer = inside & (t < best)
        if not closer.any():
            continue
        best[closer] = t[closer]
        tex = value_noise(s_coord[closer], t_coord[closer], patch.seed, patch.cell)
        image[closer] = patch.base + patch.contrast * (tex - 0.5)
    # ray z-component is 1, so the ray parameter equals optical-axis depth
    return image, DepthMap(np.where(np.isfinite(best), best, np.inf).astype(np.float32))


def views(scene: SyntheticScene, quantize: bool = True) -> list:
    out = []
    for i, pose in enumerate(scene.poses):
        img, _ = render(scene, i)
        if quantize:
            img = np.clip(np.round(img), 0, 255).astype(np.uint8)
        out.append(CameraView(scene.intrinsics, pose, img))
    return out


def lateral_trajectory(count: int = 5, baseline: float = 1.0, rise: float = 0.3) -> tuple:
    """Identity-orientation cameras stepping along +x (and a little +y) around the origin."""
    mid = (count - 1) / 2.0
    return tuple(
        CameraPose(np.eye(3), np.array([(k - mid) * baseline, (k - mid) * baseline * rise, 0.0]))
        for k in range(count)
    )


def two_plane_scene(
    width: int = 320,
    height: int = 240,
    slab_depth: float = 10.0,
    ground_depth: float = 30.0,
    slab_fraction: tuple = (0.4, 0.4),
    baseline: float = 1.0,
    focal: float | None = None,
    texel_px: float = 2.5,
) -> SyntheticScene:
    """Frontoparallel ground plane with a brighter rectangular slab in front of it.

    The slab spans ``slab_fraction`` of the image width/height at the
    reference (center) view. Texture lattice cells project to about
    ``texel_px`` pixels in the reference view.
    """
    f = focal or 0.9 * width
    intr = CameraIntrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0)
    half_u = slab_fraction[0] * width / 2.0 * slab_depth / f
    half_v = slab_fraction[1] * height / 2.0 * slab_depth / f
    ground = Patch((0.0, 0.0, ground_depth), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0),
                   seed=11, cell=texel_px * ground_depth / f, base=85.0, contrast=110.0)
    slab = Patch((0.0, 0.0, slab_depth), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), half_u, half_v,
                 seed=23, cell=texel_px * slab_depth / f, base=175.0, contrast=110.0)
    poses = lateral_trajectory(5, baseline)
    x0 = int(np.floor(intr.cx - half_u * f / slab_depth))
    x1 = int(np.ceil(intr.cx + half_u * f / slab_depth)) + 1
    y0 = int(np.floor(intr.cy - half_v * f / slab_depth))
    y1 = int(np.ceil(intr.cy + half_v * f / slab_depth)) + 1
    return SyntheticScene((ground, slab), poses, intr, width, height,
                          meta={"slab_box": (x0, y0, x1, y1), "slab_depth": slab_depth, "ground_depth": ground_depth})


def write_scene(scene: SyntheticScene, directory) -> Path:
    """Emit PNG frames plus a camera file; returns the camera file path."""
    from .io import FrameRecord, save_cameras, write_gray

    directory = Path(directory)
    records = []
    for i in range(len(scene.poses)):
        img, _ = render(scene, i)
        name = f"frame_{i:04d}.png"
        write_gray(img, directory / "frames" / name)
        records.append(FrameRecord(str(i), name, scene.intrinsics, scene.poses[i]))
    cam = directory / "cameras.json"
    save_cameras(records, cam)
    return cam
