"""Pinhole cameras, sweep planes and plane-induced homographies.

Pose convention: ``x_cam = rotation @ (X_world - center)``, i.e. ``rotation``
is the world-to-camera rotation and the projection matrix is
``K [rotation | -rotation @ center]``. Pixel centers sit on integer
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCount, InvalidRange, NumericalDegeneracy, RayParallel

FRONTOPARALLEL = (0.0, 0.0, 1.0)
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, self.skew, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    @property
    def K_inv(self) -> np.ndarray:
        # closed form keeps the last row exactly (0, 0, 1)
        fx, fy, s, cx, cy = self.fx, self.fy, self.skew, self.cx, self.cy
        return np.array(
            [[1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy)], [0.0, 1.0 / fy, -cy / fy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    def scaled(self, sx: float, sy: float) -> "CameraIntrinsics":
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, self.skew * sx)

    def shifted(self, dx: float, dy: float) -> "CameraIntrinsics":
        """Intrinsics of a crop whose top-left corner is at pixel (dx, dy)."""
        return CameraIntrinsics(self.fx, self.fy, self.cx - dx, self.cy - dy, self.skew)


@dataclass(frozen=True)
class CameraPose:
    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        C = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not np.allclose(R @ R.T, np.eye(3), rtol=0.0, atol=1e-9):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", C)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    def to_camera(self, X: np.ndarray) -> np.ndarray:
        """World points (..., 3) into this camera's frame."""
        return (np.asarray(X, dtype=np.float64) - self.center) @ self.rotation.T


@dataclass(frozen=True, eq=False)
class CameraView:
    intrinsics: CameraIntrinsics
    pose: CameraPose
    image: np.ndarray = field(repr=False)

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])


@dataclass(frozen=True)
class SweepPlane:
    normal: tuple
    distance: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("plane normal must be a unit vector")
        if not self.distance > 0:
            raise InvalidRange(f"plane distance must be positive, got {self.distance}")
        object.__setattr__(self, "normal", tuple(float(v) for v in n))
        object.__setattr__(self, "distance", float(self.distance))

    @property
    def n(self) -> np.ndarray:
        return np.array(self.normal, dtype=np.float64)


@dataclass(frozen=True)
class PlaneStack:
    planes: tuple
    d_min: float
    d_max: float

    def __len__(self) -> int:
        return len(self.planes)

    def __getitem__(self, i: int) -> SweepPlane:
        return self.planes[i]

    @property
    def normal(self) -> np.ndarray:
        return self.planes[0].n

    @property
    def distances(self) -> np.ndarray:
        return np.array([p.distance for p in self.planes], dtype=np.float64)

    @property
    def is_frontoparallel(self) -> bool:
        return self.planes[0].normal == FRONTOPARALLEL


def project(view: CameraView, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project world points (..., 3); returns (pixels (..., 2), depth (...))."""
    Xc = view.pose.to_camera(X)
    uvw = Xc @ view.intrinsics.K.T
    return uvw[..., :2] / uvw[..., 2:3], Xc[..., 2]


def projection_matrix(view: CameraView) -> np.ndarray:
    R = view.pose.rotation
    Rt = np.hstack([R, (-R @ view.pose.center)[:, None]])
    return view.intrinsics.K @ Rt


def relative_motion(ref: CameraPose, other: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Rotation R and translation t with ``x_other = R @ x_ref - t``."""
    R = other.rotation @ ref.rotation.T
    t = other.rotation @ (other.center - ref.center)
    return R, t


def plane_homography(ref: CameraView, other: CameraView, plane: SweepPlane) -> np.ndarray:
    """Homography taking reference pixels to pixels of ``other`` for points on ``plane``.

    ``plane`` is given in the reference camera frame as ``n . x = d``.
    """
    R, t = relative_motion(ref.pose, other.pose)
    K = ref.intrinsics.K
    H = K @ (R - np.outer(t, plane.n) / plane.distance) @ np.linalg.inv(K)
    if not np.all(np.isfinite(H)) or np.linalg.cond(H) > _COND_LIMIT:
        raise NumericalDegeneracy("plane-induced homography is singular")
    if H[2, 2] != 0.0:
        H = H / H[2, 2]
    return H


def sample_planes(d_min: float, d_max: float, count: int, normal=FRONTOPARALLEL) -> PlaneStack:
    """``count`` planes between ``d_min`` and ``d_max``, equally spaced in 1/d."""
    if not (d_min > 0 and d_min < d_max):
        raise InvalidRange(f"need 0 < d_min < d_max, got d_min={d_min}, d_max={d_max}")
    if count < 2:
        raise InvalidCount(f"need at least 2 planes, got {count}")
    inv = 1.0 / d_min + (np.arange(count) / (count - 1)) * (1.0 / d_max - 1.0 / d_min)
    dist = 1.0 / inv
    dist[0], dist[-1] = d_min, d_max
    planes = tuple(SweepPlane(normal, float(d)) for d in dist)
    return PlaneStack(planes, float(d_min), float(d_max))


def pixel_rays(width: int, height: int, intrinsics: CameraIntrinsics, origin=(0, 0)) -> np.ndarray:
    """K^-1 (x, y, 1) for every pixel, shape (H, W, 3)."""
    ys, xs = np.mgrid[origin[1]:origin[1] + height, origin[0]:origin[0] + width]
    pix = np.stack([xs, ys, np.ones_like(xs)], axis=-1).astype(np.float64)
    return pix @ intrinsics.K_inv.T


def depth_from_plane(pixel, plane: SweepPlane, intrinsics: CameraIntrinsics) -> float:
    """Optical-axis depth where the viewing ray through ``pixel`` meets ``plane``."""
    ray = intrinsics.K_inv @ np.array([pixel[0], pixel[1], 1.0])
    denom = float(plane.n @ ray)
    if abs(denom) < 1e-12:
        raise RayParallel(f"viewing ray through {tuple(pixel)} is parallel to the plane")
    return plane.distance / denom * ray[2]
