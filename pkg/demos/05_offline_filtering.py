"""Offline pseudo-label curation on a detector results dump.

Builds a small COCO results-format array, filters it with per-class
thresholds, and audits the survivors against ground truth with greedy IoU
matching. The same flow is available from the command line:

    selfteach filter --results dets.json --thresholds thr.json --gt gt.json --output out/
"""

from selfteach import filter_detections, iou, macro_f1, match_metrics
from selfteach.labels import detections_from_coco, ground_truth_from_coco

results = [
    {"image_id": 0, "category_id": 1, "bbox": [10, 10, 40, 30], "score": 0.92},
    {"image_id": 0, "category_id": 1, "bbox": [100, 50, 42, 28], "score": 0.55},
    {"image_id": 0, "category_id": 1, "bbox": [300, 200, 40, 30], "score": 0.20},
    {"image_id": 0, "category_id": 2, "bbox": [200, 120, 60, 40], "score": 0.48},
    {"image_id": 1, "category_id": 2, "bbox": [20, 30, 55, 45], "score": 0.71},
    {"image_id": 1, "category_id": 1, "bbox": [400, 90, 38, 32], "score": 0.35},
]
annotations = [
    {"image_id": 0, "category_id": 1, "bbox": [12, 12, 40, 30]},
    {"image_id": 0, "category_id": 1, "bbox": [102, 52, 42, 28]},
    {"image_id": 0, "category_id": 2, "bbox": [202, 122, 60, 40]},
    {"image_id": 1, "category_id": 2, "bbox": [22, 32, 55, 45]},
]

dets = detections_from_coco(results)
gt = ground_truth_from_coco(annotations)

print("per-class thresholds N = {1: 0.5, 2: 0.4}")
report = filter_detections(dets, {1: 0.5, 2: 0.4})
for det in report.kept:
    print(f"  kept: image {det.image_id} class {det.class_id} score {det.score:.2f}")
print(f"dropped per class: {report.dropped_counts}")

metrics = match_metrics(report.kept, gt, iou_thr=0.5)
for cid, m in metrics.items():
    print(f"class {cid}: TP={m.tp} FP={m.fp} FN={m.fn}  P={m.precision:.2f} R={m.recall:.2f} F1={m.f1:.2f}")
print(f"macro F1: {macro_f1(metrics):.3f}")

a, b = results[0]["bbox"], annotations[0]["bbox"]
print(f"\nIoU of the first prediction vs its annotation: {iou(tuple(a), tuple(b)):.3f}")
