"""Pixel-wise confusion-matrix scoring and method comparison tables."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import as_mask, check_same_shape


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    def iou(self) -> float:
        denom = self.tp + self.fp + self.fn
        return 1.0 if denom == 0 else self.tp / denom

    def dice(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 1.0 if denom == 0 else 2 * self.tp / denom


def confusion(pred, truth, roi=None) -> ConfusionMatrix:
    """Count TP/FP/TN/FN over ``roi`` (all pixels when None); filament is positive."""
    check_same_shape(np.shape(pred), np.shape(truth))
    pred = as_mask(pred)
    truth = as_mask(truth)
    if roi is not None:
        roi = as_mask(roi, pred.shape)
        pred, truth = pred[roi], truth[roi]
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size - tp - fp - fn)
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(matrix: ConfusionMatrix) -> tuple[float, float]:
    """Accuracy rate and true positive rate.

    TPR is 1.0 when there are no positive pixels at all.
    """
    if matrix.total == 0:
        raise ValueError("cannot score an empty confusion matrix")
    ar = (matrix.tp + matrix.tn) / matrix.total
    positives = matrix.tp + matrix.fn
    tpr = 1.0 if positives == 0 else matrix.tp / positives
    return ar, tpr


@dataclass
class MetricsReport:
    method: str
    image_id: str
    matrix: ConfusionMatrix
    wall_time_seconds: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def ar(self) -> float:
        return metrics(self.matrix)[0]

    @property
    def tpr(self) -> float:
        return metrics(self.matrix)[1]

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "image_id": self.image_id,
            **asdict(self.matrix),
            "ar": self.ar,
            "tpr": self.tpr,
            "wall_time_seconds": self.wall_time_seconds,
        }
        if self.extras:
            out["extras"] = self.extras
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        matrix = ConfusionMatrix(int(d["tp"]), int(d["fp"]), int(d["tn"]), int(d["fn"]))
        return cls(
            method=str(d["method"]),
            image_id=str(d["image_id"]),
            matrix=matrix,
            wall_time_seconds=float(d.get("wall_time_seconds", 0.0)),
            extras=dict(d.get("extras", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_report(method, image_id, pred, truth, roi=None, wall_time_seconds=0.0) -> MetricsReport:
    """Score ``pred`` over ``roi``; the full-frame matrix and IoU/Dice go to extras."""
    matrix = confusion(pred, truth, roi)
    extras = {
        "scope": "full" if roi is None else "roi",
        "iou": matrix.iou(),
        "dice": matrix.dice(),
        "tpr_by_convention": matrix.tp + matrix.fn == 0,
    }
    if roi is not None:
        extras["full_frame"] = asdict(confusion(pred, truth))
    return MetricsReport(method, image_id, matrix, wall_time_seconds, extras)


COMPARE_FIELDS = ("method", "image_id", "ar", "tpr", "wall_time_seconds")


def compare_methods(reports) -> list[MetricsReport]:
    """Reports sorted by AR, then TPR (both descending), then method name."""
    reports = list(reports)
    return sorted(reports, key=lambda r: (-r.ar, -r.tpr, r.method, r.image_id))


def comparison_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_FIELDS)
    for r in rows:
        writer.writerow([r.method, r.image_id, f"{r.ar:.6f}", f"{r.tpr:.6f}",
                         f"{r.wall_time_seconds:.4f}"])
    return buf.getvalue()


def comparison_text(rows) -> str:
    lines = [f"{'method':<12} {'image':<24} {'AR':>8} {'TPR':>8} {'time[s]':>9}"]
    for r in rows:
        lines.append(f"{r.method:<12} {r.image_id:<24} {r.ar:>8.4f} {r.tpr:>8.4f} "
                     f"{r.wall_time_seconds:>9.3f}")
    return "\n".join(lines)
