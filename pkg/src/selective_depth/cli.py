"""``depth`` command: estimate reference-frame depth for one or more bundles."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .edges import EDGE_PROVIDERS
from .errors import DepthError
from .pipeline import PipelineConfig, rescale_inputs, run, select_bundle


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="depth", description=__doc__)
    p.add_argument("--cameras", required=True, help="camera file (JSON)")
    p.add_argument("--frames", required=True, help="directory the camera file's image paths resolve against")
    p.add_argument("--center", type=int, help="index of the reference frame")
    p.add_argument("--batch", action="store_true", help="process every valid center with stride 1")
    p.add_argument("--rois", help="detection file (CSV: frame,x0,y0,x1,y1,score,label)")
    p.add_argument("--selective", action="store_true", help="reconstruct only inside detected boxes")
    p.add_argument("--planes", type=int, default=128)
    p.add_argument("--dmin", type=float, required=True)
    p.add_argument("--dmax", type=float, required=True)
    p.add_argument("--p1", type=float, default=5.0)
    p.add_argument("--p2", type=float, default=50.0)
    p.add_argument("--scale", type=float, default=0.5)
    p.add_argument("--nms-threshold", type=float, default=0.3)
    p.add_argument("--score-cutoff", type=float, default=0.8)
    p.add_argument("--edge", choices=EDGE_PROVIDERS, default="lsd")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-pfm")
    p.add_argument("--out-png")
    p.add_argument("--timing")
    p.add_argument("--mask-png", help="debug: write the line mask")
    p.add_argument("--cost-dir", help="debug: write per-plane cost slices")
    return p


def _per_center(path: str | None, center: int, batch: bool) -> str | None:
    if path is None or not batch:
        return path
    if "{center}" in path:
        return path.format(center=center)
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{center:04d}{p.suffix}"))


def process(args, records, views, rois_by_frame, config, center: int) -> None:
    bundle = select_bundle(views, center)
    ref_id = records[center].id
    boxes = rois_by_frame.get(ref_id, [])
    bundle, boxes = rescale_inputs(bundle, boxes, config)

    mask = None
    if args.mask_png or args.cost_dir:
        from .edges import line_mask

        mask = line_mask(bundle.reference.image, config.edge_provider)
        if args.mask_png:
            io.write_mask_png(mask, _per_center(args.mask_png, center, args.batch))
        if args.cost_dir:
            from .matching import build_cost_volume

            vol = build_cost_volume(bundle, config.stack(), workers=config.workers)
            io.write_cost_slices(vol, _per_center(args.cost_dir, center, args.batch))

    depth, report = run(bundle, boxes, config, mask=mask)
    if args.out_pfm:
        io.write_depth_pfm(depth, _per_center(args.out_pfm, center, args.batch))
    if args.out_png:
        io.write_depth_png(depth, _per_center(args.out_png, center, args.batch), config.d_min, config.d_max)
    if args.timing:
        doc = report.as_dict()
        doc["center"] = center
        doc["frame"] = ref_id
        io.write_json(doc, _per_center(args.timing, center, args.batch))


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.center is None and not args.batch:
            raise ValueError("either --center or --batch is required")
        config = PipelineConfig(
            d_min=args.dmin, d_max=args.dmax, plane_count=args.planes, p1=args.p1, p2=args.p2,
            scale=args.scale, overlap_threshold=args.nms_threshold, score_cutoff=args.score_cutoff,
            selective=args.selective, edge_provider=args.edge, workers=args.workers,
        )
        records, views = io.load_views(args.cameras, args.frames)
        rois_by_frame = io.load_rois(args.rois) if args.rois else {}
        centers = range(2, len(views) - 2) if args.batch else [args.center]
        for c in centers:
            process(args, records, views, rois_by_frame, config, c)
    except (DepthError, ValueError, KeyError, OSError) as exc:
        io.emit_error(exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
