"""File formats: camera and ROI documents, PFM/PNG depth output, debug rasters."""

from __future__ import annotations

import csv
import json
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import IoFailure
from .geometry import CameraIntrinsics, CameraPose, CameraView
from .roi import DetectionBox
from .sgm import DepthMap

ROI_FIELDS = ("frame", "x0", "y0", "x1", "y1", "score", "label")


@dataclass(frozen=True)
class FrameRecord:
    id: str
    image_path: str
    intrinsics: CameraIntrinsics
    pose: CameraPose


def _writer(path, mode="wb"):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, **({"newline": ""} if "b" not in mode else {}))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --- depth maps -------------------------------------------------------------

def write_depth_pfm(depth: DepthMap, path) -> None:
    """Single-channel little-endian PFM, rows stored bottom to top; invalid = +inf."""
    d = np.where(depth.valid, depth.depth, np.inf).astype("<f4")
    h, w = d.shape
    with _writer(path) as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.ascontiguousarray(d[::-1]).tobytes())


def read_depth_pfm(path) -> DepthMap:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise ValueError(f"{path}: not a single-channel PFM (header {header!r})")
        dims = f.readline()
        while dims.startswith(b"#"):
            dims = f.readline()
        w, h = (int(v) for v in dims.split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(4 * w * h), dtype=dtype)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated raster")
    return DepthMap(data.reshape(h, w)[::-1].astype(np.float32))


def depth_colors(depth: DepthMap, near: float | None = None, far: float | None = None) -> np.ndarray:
    """RGB ramp red (near) -> green -> blue (far), linear in inverse depth; invalid = black."""
    valid = depth.valid
    rgb = np.zeros(depth.depth.shape + (3,), dtype=np.uint8)
    if not valid.any():
        return rgb
    d = depth.depth[valid].astype(np.float64)
    near = float(d.min()) if near is None else near
    far = float(d.max()) if far is None else far
    span = 1.0 / near - 1.0 / far
    t = np.zeros_like(d) if span <= 0 else np.clip((1.0 / near - 1.0 / d) / span, 0.0, 1.0)
    ramp = np.stack([np.clip(1 - 2 * t, 0, 1), 1 - np.abs(2 * t - 1), np.clip(2 * t - 1, 0, 1)], axis=-1)
    rgb[valid] = np.round(255 * ramp).astype(np.uint8)
    return rgb


def write_depth_png(depth: DepthMap, path, near: float | None = None, far: float | None = None) -> None:
    with _writer(path) as f:
        Image.fromarray(depth_colors(depth, near, far), mode="RGB").save(f, format="PNG")


def write_mask_png(mask, path) -> None:
    bits = np.asarray(getattr(mask, "bits", mask), dtype=np.bool_)
    with _writer(path) as f:
        Image.fromarray(bits).convert("1").save(f, format="PNG")


def write_cost_slices(volume, directory) -> list:
    """One 8-bit PNG per plane, cost scaled by 4."""
    directory = Path(directory)
    paths = []
    for r in range(volume.planes):
        img = np.clip(np.round(volume.filled()[:, :, r] * 4), 0, 255).astype(np.uint8)
        p = directory / f"cost_{r:03d}.png"
        with _writer(p) as f:
            Image.fromarray(img).save(f, format="PNG")
        paths.append(p)
    return paths


# --- images and camera documents -------------------------------------------

def read_gray(path) -> np.ndarray:
    try:
        img = Image.open(path)
    except OSError as exc:
        raise IoFailure(f"cannot read image {path}: {exc}") from exc
    if img.mode in ("I;16", "I;16B", "I", "F"):
        return np.asarray(img, dtype=np.float32)
    return np.asarray(img.convert("L"), dtype=np.uint8)


def write_gray(image, path) -> None:
    with _writer(path) as f:
        Image.fromarray(np.clip(np.round(image), 0, 255).astype(np.uint8)).save(f, format="PNG")


def load_cameras(path) -> list:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read camera file {path}: {exc}") from exc
    frames = doc["frames"] if isinstance(doc, dict) else doc
    out = []
    for fr in frames:
        intr = CameraIntrinsics(fr["fx"], fr["fy"], fr["cx"], fr["cy"], fr.get("skew", 0.0))
        pose = CameraPose(np.reshape(fr["R"], (3, 3)), np.asarray(fr["C"], dtype=np.float64))
        out.append(FrameRecord(str(fr["id"]), fr["image_path"], intr, pose))
    return out


def save_cameras(records: list, path) -> None:
    frames = [
        {
            "id": r.id,
            "image_path": r.image_path,
            "fx": r.intrinsics.fx,
            "fy": r.intrinsics.fy,
            "cx": r.intrinsics.cx,
            "cy": r.intrinsics.cy,
            "skew": r.intrinsics.skew,
            "R": [float(v) for v in r.pose.rotation.ravel()],
            "C": [float(v) for v in r.pose.center],
        }
        for r in records
    ]
    with _writer(path) as f:
        f.write(json.dumps({"frames": frames}, indent=2).encode())


def load_views(camera_file, frames_dir) -> tuple[list, list]:
    """CameraViews for every frame of a camera file; image paths resolve against ``frames_dir``."""
    records = load_cameras(camera_file)
    views = []
    for r in records:
        p = Path(r.image_path)
        if not p.is_absolute():
            p = Path(frames_dir) / p
        views.append(CameraView(r.intrinsics, r.pose, read_gray(p)))
    return records, views


# --- ROI documents ----------------------------------------------------------

def load_rois(path) -> dict:
    """Detections grouped by frame id. Coordinates are in original image pixels."""
    out: dict = {}
    try:
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                box = DetectionBox(
                    float(row["x0"]), float(row["y0"]), float(row["x1"]), float(row["y1"]),
                    float(row["score"]), row.get("label") or "building",
                )
                out.setdefault(str(row["frame"]), []).append(box)
    except OSError as exc:
        raise IoFailure(f"cannot read ROI file {path}: {exc}") from exc
    return out


def save_rois(rois: dict, path) -> None:
    with _writer(path, "w") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ROI_FIELDS)
        for frame, boxes in rois.items():
            for b in boxes:
                w.writerow([frame, b.x0, b.y0, b.x1, b.y1, b.score, b.label])


def write_json(obj, path) -> None:
    with _writer(path) as f:
        f.write(json.dumps(obj, indent=2).encode())


def error_record(exc: BaseException) -> str:
    code = getattr(exc, "code", re.sub(r"(?<!^)(?=[A-Z])", "_", type(exc).__name__).lower())
    return json.dumps({"error": code, "message": str(exc)})


def emit_error(exc: BaseException, stream=None) -> None:
    print(error_record(exc), file=stream or sys.stderr)

