"""End-to-end filament detection and the multi-method experiment harness."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import acwe as _acwe
from .acwe import AcweConfig, AcweResult
from .baselines import KMeansConfig, kmeans_segment, otsu_threshold
from .core import detect_disk, load_image, load_mask, save_image, save_mask
from .errors import FilamentError, StageError
from .evaluation import MetricsReport, compare_methods, comparison_csv, comparison_text, make_report
from .postprocess import PostprocessConfig, filter_by_area
from .preprocess import InpaintConfig, build_white_patch_mask, inpaint, log_transform, sharpen

log = logging.getLogger(__name__)

STAGES = (
    "detect_disk",
    "build_white_patch_mask",
    "inpaint",
    "log_transform",
    "sharpen",
    "evolve",
    "filament_mask",
    "filter_by_area",
)
MASK_NAME = "filaments.pgm"
MANIFEST_NAME = "run.json"
IMAGE_SUFFIXES = (".png", ".pgm")


def _build(cls, data: dict | None):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of the pipeline; all fields are optional in JSON.

    ``disk_threshold`` is the relative intensity threshold of disk
    detection and ``disk_margin`` shrinks the fitted disk (in pixels) before
    it is used as the region of interest.
    """

    inpaint: InpaintConfig = field(default_factory=InpaintConfig)
    acwe: AcweConfig = field(default_factory=AcweConfig)
    post: PostprocessConfig = field(default_factory=PostprocessConfig)
    use_disk_mask: bool = True
    emit_intermediates: bool = False
    disk_threshold: float = 0.25
    disk_margin: float = 2.0

    @classmethod
    def from_dict(cls, d: dict | None) -> "PipelineConfig":
        d = dict(d or {})
        nested = {
            "inpaint": _build(InpaintConfig, d.pop("inpaint", None)),
            "acwe": _build(AcweConfig, d.pop("acwe", None)),
            "post": _build(PostprocessConfig, d.pop("post", None)),
        }
        return replace(_build(cls, d), **nested)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    return PipelineConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PipelineOutput:
    mask: np.ndarray
    roi: np.ndarray | None
    acwe: AcweResult | None
    stage_seconds: dict[str, float]
    intermediates: dict[str, np.ndarray]
    disk: dict | None = None


def segment_image(img, config: PipelineConfig = PipelineConfig(), on_stage=None) -> PipelineOutput:
    """Run all eight stages on an in-memory image.

    ``on_stage(name, products)`` is called after each stage with the arrays
    it produced.  Any failure is re-raised as :class:`StageError`.
    """
    times: dict[str, float] = {}
    products: dict[str, np.ndarray] = {}
    state: dict = {"img": np.asarray(img, dtype=np.float64)}

    def run(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        times[name] = time.perf_counter() - t0
        new = out or {}
        products.update(new)
        if on_stage is not None:
            on_stage(name, new)

    def stage_disk():
        if not config.use_disk_mask:
            state["roi"] = None
            state["disk"] = None
            return {}
        geom, _ = detect_disk(state["img"], config.disk_threshold)
        state["roi"] = geom.mask(state["img"].shape, margin=config.disk_margin)
        state["disk"] = asdict(geom)
        return {"disk": state["roi"]}

    def stage_omega():
        state["omega"] = build_white_patch_mask(state["img"], config.inpaint, state["roi"])
        return {"white_patches": state["omega"]}

    def stage_inpaint():
        state["inpainted"] = inpaint(state["img"], state["omega"], config.inpaint)
        return {"inpainted": state["inpainted"]}

    def stage_log():
        state["log"], params = log_transform(state["inpainted"])
        state["log_params"] = asdict(params)
        return {"log": state["log"]}

    def stage_sharpen():
        state["sharpened"] = sharpen(state["log"])
        return {"sharpened": state["sharpened"]}

    def stage_evolve():
        state["acwe"] = _acwe.evolve(state["sharpened"], config.acwe, state["roi"])
        return {"acwe_raw": state["acwe"].mask}

    def stage_select():
        mask = _acwe.filament_mask(state["acwe"], state["sharpened"])
        if state["roi"] is not None:
            mask &= state["roi"]
        state["selected"] = mask
        return {"filament_raw": mask}

    def stage_filter():
        state["final"] = filter_by_area(state["selected"], config.post)
        return {}

    for name, fn in zip(STAGES, (stage_disk, stage_omega, stage_inpaint, stage_log, stage_sharpen,
                                 stage_evolve, stage_select, stage_filter)):
        run(name, fn)
    return PipelineOutput(
        mask=state["final"],
        roi=state["roi"],
        acwe=state["acwe"],
        stage_seconds=times,
        intermediates=products,
        disk=state["disk"],
    )


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, data) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def _write_trace(path: Path, result: AcweResult) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "energy", "delta"])
        for i, e in enumerate(result.energy_trace):
            w.writerow([i, repr(e), "" if i == 0 else repr(result.delta_trace[i - 1])])
    tmp.replace(path)


INTERMEDIATE_FILES = {
    "disk": "disk.pgm",
    "white_patches": "white_patches.pgm",
    "inpainted": "inpainted.png",
    "log": "log.png",
    "sharpened": "sharpened.png",
    "acwe_raw": "acwe_raw.pgm",
    "filament_raw": "filament_raw.pgm",
}


def run_pipeline(input_path, config: PipelineConfig, out_dir) -> dict:
    """Run the pipeline on an image file and write artifacts to ``out_dir``.

    Always writes ``filaments.pgm`` and ``run.json``; with
    ``emit_intermediates`` the per-stage images and ``energy_trace.csv`` too.
    Returns the manifest.  On failure the manifest records the error and
    whatever intermediates were already written are left in place.
    """
    input_path = Path(input_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    manifest = {
        "input": str(input_path),
        "input_sha256": None,
        "config": config.to_dict(),
        "stages": list(STAGES),
        "outputs": [],
    }

    def on_stage(name, products):
        if not config.emit_intermediates:
            return
        for key, arr in products.items():
            fname = INTERMEDIATE_FILES[key]
            if fname.endswith(".pgm"):
                save_mask(arr, out / fname)
            else:
                save_image(arr, out / fname)
            manifest["outputs"].append(fname)

    try:
        try:
            img = load_image(input_path)
            manifest["input_sha256"] = _sha256(input_path)
        except (FilamentError, OSError) as exc:
            raise StageError("load_image", exc) from exc
        result = segment_image(img, config, on_stage)
    except StageError as exc:
        manifest["error"] = {"stage": exc.stage, "message": str(exc.cause)}
        manifest["timestamps"] = {"started": started,
                                  "finished": datetime.now(timezone.utc).isoformat()}
        _write_json(out / MANIFEST_NAME, manifest)
        raise

    save_mask(result.mask, out / MASK_NAME)
    manifest["outputs"].append(MASK_NAME)
    if config.emit_intermediates:
        _write_trace(out / "energy_trace.csv", result.acwe)
        manifest["outputs"].append("energy_trace.csv")
    a = result.acwe
    manifest["disk"] = result.disk
    manifest["acwe"] = {
        "iterations_run": a.iterations_run,
        "converged": a.converged,
        "c1": a.c1,
        "c2": a.c2,
        "initial_energy": a.energy_trace[0],
        "final_energy": a.energy_trace[-1],
        "filament_region": "inside" if a.c1 <= a.c2 else "outside",
    }
    manifest["filament_pixels"] = int(np.count_nonzero(result.mask))
    manifest["timing"] = {
        "stage_seconds": result.stage_seconds,
        "total_seconds": time.perf_counter() - t0,
    }
    manifest["timestamps"] = {"started": started,
                              "finished": datetime.now(timezone.utc).isoformat()}
    _write_json(out / MANIFEST_NAME, manifest)
    return manifest


def rerun_from_manifest(manifest_path, out_dir) -> dict:
    """Re-execute a run recorded in ``run.json``."""
    manifest = json.loads(Path(manifest_path).read_text())
    config = PipelineConfig.from_dict(manifest["config"])
    return run_pipeline(manifest["input"], config, out_dir)


# ---------------------------------------------------------------------------
# experiment harness

def pair_files(image_dir, truth_dir) -> tuple[list[tuple[Path, Path]], list[Path]]:
    """Match images to ground-truth files by file stem.

    Returns the pairs and the list of files that had no partner.
    """
    images = {p.stem: p for p in sorted(Path(image_dir).iterdir())
              if p.suffix.lower() in IMAGE_SUFFIXES}
    truths = {p.stem: p for p in sorted(Path(truth_dir).iterdir())
              if p.suffix.lower() in IMAGE_SUFFIXES}
    pairs = [(images[s], truths[s]) for s in sorted(images.keys() & truths.keys())]
    unpaired = [images[s] for s in sorted(images.keys() - truths.keys())]
    unpaired += [truths[s] for s in sorted(truths.keys() - images.keys())]
    return pairs, unpaired


def evaluate_image(img, truth, image_id: str, config: PipelineConfig = PipelineConfig(),
                   kmeans: KMeansConfig = KMeansConfig()) -> list[MetricsReport]:
    """Score the pipeline and both baselines on one image.

    Baselines run on the raw image and then get the same post-processing as
    the pipeline: restriction to the disk region (when enabled) and area
    filtering.  Scores are over the disk region when it is used; the
    full-frame counts go into each report's extras.
    """
    t0 = time.perf_counter()
    result = segment_image(img, config)
    reports = [make_report("acwe", image_id, result.mask, truth, result.roi,
                           time.perf_counter() - t0)]
    roi = result.roi
    baselines = (
        ("otsu", lambda: otsu_threshold(img)[1]),
        ("kmeans", lambda: kmeans_segment(img, kmeans)),
    )
    for name, fn in baselines:
        t0 = time.perf_counter()
        mask = fn()
        if roi is not None:
            mask &= roi
        mask = filter_by_area(mask, config.post)
        reports.append(make_report(name, image_id, mask, truth, roi, time.perf_counter() - t0))
    for r in reports:
        r.extras["baseline_input"] = "raw" if r.method != "acwe" else "preprocessed"
        r.extras["postprocessed"] = True
    return reports


def run_experiment(image_dir, truth_dir, config: PipelineConfig, out_dir,
                   threads: int = 1) -> list[MetricsReport]:
    """Run every method on every paired image and write reports plus a table.

    Writes ``reports/<image>__<method>.json``, ``comparison.csv`` and
    ``comparison.txt`` under ``out_dir`` and returns the sorted reports.
    """
    out = Path(out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    pairs, unpaired = pair_files(image_dir, truth_dir)
    for p in unpaired:
        log.warning("skipping unpaired file %s", p)
    if not pairs:
        log.warning("no image/ground-truth pairs found in %s and %s", image_dir, truth_dir)

    def job(pair):
        image_path, truth_path = pair
        img = load_image(image_path)
        truth = load_mask(truth_path)
        return evaluate_image(img, truth, image_path.stem, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(job, pairs))
    else:
        batches = [job(p) for p in pairs]

    reports = [r for batch in batches for r in batch]
    for r in reports:
        _write_json(out / "reports" / f"{r.image_id}__{r.method}.json", r.to_dict())
    rows = compare_methods(reports)
    (out / "comparison.csv").write_text(comparison_csv(rows))
    (out / "comparison.txt").write_text(comparison_text(rows) + "\n")
    _write_json(out / MANIFEST_NAME, {
        "image_dir": str(image_dir),
        "truth_dir": str(truth_dir),
        "config": config.to_dict(),
        "images": [p[0].name for p in pairs],
        "skipped": [str(p) for p in unpaired],
    })
    return rows
