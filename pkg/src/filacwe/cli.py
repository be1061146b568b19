"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 stage failure, 3 dimension
mismatch during evaluation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import synth as _synth
from .acwe import evolve, filament_mask
from .baselines import KMeansConfig, kmeans_segment, otsu_threshold
from .core import detect_disk, load_image, load_mask, save_image, save_mask
from .errors import DimensionMismatchError, FilamentError
from .evaluation import MetricsReport, compare_methods, comparison_csv, comparison_text, make_report
from .pipeline import PipelineConfig, load_config, rerun_from_manifest, run_experiment, run_pipeline
from .postprocess import PostprocessConfig, component_report, filter_by_area
from .preprocess import build_white_patch_mask, inpaint, log_transform, sharpen

EXIT_OK, EXIT_USAGE, EXIT_STAGE, EXIT_MISMATCH = 0, 1, 2, 3

log = logging.getLogger("filacwe")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args) -> PipelineConfig:
    try:
        return load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad config {args.config}: {exc}") from exc


def cmd_preprocess(args):
    cfg = _config(args)
    overrides = {k: getattr(args, k) for k in
                 ("dt", "iterations", "white_patch_percentile", "dilation_radius",
                  "diffusion_steps", "diffusion_dt") if getattr(args, k) is not None}
    try:
        icfg = replace(cfg.inpaint, **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    img = load_image(args.inp)
    disk = None
    if cfg.use_disk_mask and not args.no_disk:
        geom, _ = detect_disk(img, cfg.disk_threshold)
        disk = geom.mask(img.shape, margin=cfg.disk_margin)
    omega = build_white_patch_mask(img, icfg, disk)
    out, _ = log_transform(inpaint(img, omega, icfg))
    save_image(sharpen(out), args.out)
    if args.save_mask:
        save_mask(omega, args.save_mask)


def cmd_segment(args):
    cfg = _config(args)
    img = load_image(args.inp)
    roi = load_mask(args.roi) if args.roi else None
    result = evolve(img, cfg.acwe, roi)
    mask = filament_mask(result, img)
    if roi is not None:
        mask &= roi
    save_mask(mask, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "energy", "delta"])
            for i, e in enumerate(result.energy_trace):
                w.writerow([i, repr(e), "" if i == 0 else repr(result.delta_trace[i - 1])])
    log.info("segment: %d iterations, converged=%s, c1=%.4f c2=%.4f",
             result.iterations_run, result.converged, result.c1, result.c2)


def cmd_baseline(args):
    img = load_image(args.inp)
    roi = load_mask(args.roi) if args.roi else None
    if args.method == "otsu":
        t, mask = otsu_threshold(img, roi)
        log.info("otsu threshold %d", t)
    else:
        mask = kmeans_segment(img, KMeansConfig(k=args.k), roi)
    save_mask(mask, args.out)


def cmd_postprocess(args):
    mask = filter_by_area(load_mask(args.inp), PostprocessConfig(min_area=args.min_area))
    save_mask(mask, args.out)
    if args.report:
        rows = component_report(mask)
        with open(args.report, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["label", "area", "x_min", "y_min", "x_max",
                                               "y_max", "centroid_x", "centroid_y"],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


def cmd_evaluate(args):
    pred = load_mask(args.pred)
    truth = load_mask(args.truth)
    roi = load_mask(args.roi) if args.roi else None
    report = make_report(args.method, args.image_id or Path(args.pred).stem, pred, truth, roi,
                         args.wall_time)
    Path(args.out).write_text(report.to_json() + "\n")
    print(f"AR={report.ar:.6f} TPR={report.tpr:.6f}")


def cmd_compare(args):
    reports = [MetricsReport.from_dict(json.loads(Path(p).read_text())) for p in args.reports]
    rows = compare_methods(reports)
    Path(args.out).write_text(comparison_csv(rows))
    print(comparison_text(rows))


def cmd_pipeline(args):
    if args.from_manifest:
        manifest = rerun_from_manifest(args.from_manifest, args.out_dir)
    else:
        if not args.inp:
            raise UsageError("pipeline needs --in or --from-manifest")
        cfg = _config(args)
        if args.emit_intermediates:
            cfg = replace(cfg, emit_intermediates=True)
        manifest = run_pipeline(args.inp, cfg, args.out_dir)
    log.info("pipeline finished in %.2f s", manifest["timing"]["total_seconds"])


def cmd_experiment(args):
    rows = run_experiment(args.images, args.truth, _config(args), args.out_dir, args.threads)
    print(comparison_text(rows))


def cmd_synth(args):
    try:
        spec = _synth.SynthSpec.from_dict(json.loads(Path(args.spec).read_text()))
        case = _synth.generate(spec)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad synth spec {args.spec}: {exc}") from exc
    _synth.write_case(case, args.out_dir)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--verbose", "-v", action="store_true")

    p = _Parser(prog="filacwe", description="Solar filament detection with active contours.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", parents=[common], help="inpaint, log-transform and sharpen")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--save-mask")
    s.add_argument("--no-disk", action="store_true", help="ignore the solar disk mask")
    s.add_argument("--dt", type=float)
    s.add_argument("--iterations", type=int)
    s.add_argument("--white-patch-percentile", type=float)
    s.add_argument("--dilation-radius", type=int)
    s.add_argument("--diffusion-steps", type=int)
    s.add_argument("--diffusion-dt", type=float)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("segment", parents=[common], help="ACWE segmentation")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--roi")
    s.add_argument("--trace")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("baseline", parents=[common], help="Otsu or k-means segmentation")
    s.add_argument("--method", choices=("otsu", "kmeans"), required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--roi")
    s.add_argument("--k", type=int, default=2)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("postprocess", parents=[common], help="remove small components")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--min-area", type=int, required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_postprocess)

    s = sub.add_parser("evaluate", parents=[common], help="confusion-matrix scoring")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--roi")
    s.add_argument("--out", required=True)
    s.add_argument("--method", default="unknown")
    s.add_argument("--image-id")
    s.add_argument("--wall-time", type=float, default=0.0)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", parents=[common], help="tabulate report JSONs")
    s.add_argument("--reports", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("pipeline", parents=[common], help="full detection pipeline")
    s.add_argument("--in", dest="inp")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--emit-intermediates", action="store_true")
    s.add_argument("--from-manifest", help="re-run the run recorded in a run.json")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("experiment", parents=[common], help="pipeline + baselines on a dataset")
    s.add_argument("--images", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("synth", parents=[common], help="render a synthetic test case")
    s.add_argument("--spec", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"filacwe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DimensionMismatchError as exc:
        print(f"filacwe: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (FilamentError, OSError) as exc:
        print(f"filacwe: failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
