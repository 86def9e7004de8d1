"""Detection data model, per-class threshold filtering, and quality metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DataError, InputError

Bbox = tuple[float, float, float, float]  # (x, y, w, h)


@dataclass(frozen=True)
class Detection:
    image_id: int | str
    class_id: int
    score: float
    bbox: Bbox

    def __post_init__(self) -> None:
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise InputError(f"score must lie in [0, 1], got {self.score}")
        _check_bbox(self.bbox)


@dataclass(frozen=True)
class GroundTruthBox:
    image_id: int | str
    class_id: int
    bbox: Bbox

    def __post_init__(self) -> None:
        _check_bbox(self.bbox)


def _check_bbox(bbox: Bbox) -> None:
    if len(bbox) != 4:
        raise InputError(f"bbox must be (x, y, w, h), got {bbox!r}")
    x, y, w, h = bbox
    if not all(math.isfinite(v) for v in bbox) or w <= 0 or h <= 0:
        raise InputError(f"bbox must have positive finite extent, got {bbox!r}")


@dataclass
class FilterReport:
    """Kept detections plus per-class bookkeeping of the filtering pass."""

    kept: list[Detection]
    kept_counts: dict[int, int]
    dropped_counts: dict[int, int]
    thresholds: dict[int, float]


@dataclass(frozen=True)
class ClassMetrics:
    """Matching counts for one class; rates are 0 when undefined."""

    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


def filter_detections(
    dets: list[Detection], thresholds: dict[int, float]
) -> FilterReport:
    """Keep exactly the detections with score >= their class threshold.

    Order-stable; every class seen in ``dets`` must have a threshold.
    """
    kept: list[Detection] = []
    kept_counts: dict[int, int] = {}
    dropped_counts: dict[int, int] = {}
    for det in dets:
        if det.class_id not in thresholds:
            raise InputError(f"no threshold for class id {det.class_id}")
        if det.score >= thresholds[det.class_id]:
            kept.append(det)
            kept_counts[det.class_id] = kept_counts.get(det.class_id, 0) + 1
            dropped_counts.setdefault(det.class_id, 0)
        else:
            dropped_counts[det.class_id] = dropped_counts.get(det.class_id, 0) + 1
            kept_counts.setdefault(det.class_id, 0)
    return FilterReport(
        kept=kept,
        kept_counts=kept_counts,
        dropped_counts=dropped_counts,
        thresholds=dict(thresholds),
    )


def iou(a: Bbox, b: Bbox) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    _check_bbox(a)
    _check_bbox(b)
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(ax, bx)
    iy = max(ay, by)
    ix2 = min(ax + aw, bx + bw)
    iy2 = min(ay + ah, by + bh)
    iw = max(0.0, ix2 - ix)
    ih = max(0.0, iy2 - iy)
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union


def match_metrics(
    pseudo: list[Detection],
    gt: list[GroundTruthBox],
    iou_thr: float = 0.5,
) -> dict[int, ClassMetrics]:
    """Greedy matching per (image, class): detections in descending score
    order each claim the best still-unmatched ground-truth box at
    IoU >= iou_thr. Unclaimed ground truth counts as a miss.
    """
    if not 0.0 < iou_thr < 1.0:
        raise InputError(f"iou_thr must lie in (0, 1), got {iou_thr}")
    det_groups: dict[tuple[int | str, int], list[Detection]] = {}
    for det in pseudo:
        det_groups.setdefault((det.image_id, det.class_id), []).append(det)
    gt_groups: dict[tuple[int | str, int], list[GroundTruthBox]] = {}
    for box in gt:
        gt_groups.setdefault((box.image_id, box.class_id), []).append(box)

    counts: dict[int, list[int]] = {}  # class -> [tp, fp, fn]
    for key in det_groups.keys() | gt_groups.keys():
        _, class_id = key
        tally = counts.setdefault(class_id, [0, 0, 0])
        dets = sorted(det_groups.get(key, []), key=lambda d: -d.score)
        boxes = gt_groups.get(key, [])
        matched = [False] * len(boxes)
        for det in dets:
            best_i = -1
            best_iou = 0.0
            for i, box in enumerate(boxes):
                if matched[i]:
                    continue
                overlap = iou(det.bbox, box.bbox)
                if overlap >= iou_thr and overlap > best_iou:
                    best_i, best_iou = i, overlap
            if best_i >= 0:
                matched[best_i] = True
                tally[0] += 1
            else:
                tally[1] += 1
        tally[2] += matched.count(False)
    return {
        cid: ClassMetrics(tp=t[0], fp=t[1], fn=t[2])
        for cid, t in sorted(counts.items())
    }


def macro_f1(metrics: dict[int, ClassMetrics], class_ids: list[int] | None = None) -> float:
    """Mean F1 over ``class_ids`` (default: the classes present in metrics);
    classes without an entry contribute 0."""
    ids = class_ids if class_ids is not None else sorted(metrics)
    if not ids:
        return 0.0
    return sum(metrics[cid].f1 if cid in metrics else 0.0 for cid in ids) / len(ids)


# --- COCO results-format interop -------------------------------------------

_DET_FIELDS = ("image_id", "category_id", "bbox", "score")


def detections_from_coco(records: list) -> list[Detection]:
    """Parse a COCO results array: {image_id, category_id, bbox, score}."""
    dets = []
    for i, rec in enumerate(records):
        try:
            if not isinstance(rec, dict):
                raise InputError("record is not an object")
            missing = [f for f in _DET_FIELDS if f not in rec]
            if missing:
                raise InputError(f"missing fields {missing}")
            dets.append(
                Detection(
                    image_id=rec["image_id"],
                    class_id=int(rec["category_id"]),
                    score=float(rec["score"]),
                    bbox=tuple(float(v) for v in rec["bbox"]),
                )
            )
        except (InputError, TypeError, ValueError) as exc:
            raise DataError(f"record {i}: {exc}") from exc
    return dets


def ground_truth_from_coco(records: list) -> list[GroundTruthBox]:
    """Parse a COCO annotations subset: {image_id, category_id, bbox}."""
    boxes = []
    for i, rec in enumerate(records):
        try:
            if not isinstance(rec, dict):
                raise InputError("record is not an object")
            missing = [f for f in ("image_id", "category_id", "bbox") if f not in rec]
            if missing:
                raise InputError(f"missing fields {missing}")
            boxes.append(
                GroundTruthBox(
                    image_id=rec["image_id"],
                    class_id=int(rec["category_id"]),
                    bbox=tuple(float(v) for v in rec["bbox"]),
                )
            )
        except (InputError, TypeError, ValueError) as exc:
            raise DataError(f"record {i}: {exc}") from exc
    return boxes


def detections_to_coco(dets: list[Detection]) -> list[dict]:
    return [
        {
            "image_id": d.image_id,
            "category_id": d.class_id,
            "bbox": list(d.bbox),
            "score": d.score,
        }
        for d in dets
    ]
