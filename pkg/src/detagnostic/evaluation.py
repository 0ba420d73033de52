"""COCO-style average precision over IoU thresholds 0.50:0.05:0.95.

Matching follows the COCO convention: per image and class, detections are
processed in descending score order and greedily take the unmatched ground
truth with the highest IoU at or above the threshold. Per-class AP is
computed from the pooled precision/recall curve, either as the literal
Riemann sum over recall increments or as the 101-point interpolated form
(the default, matching standard COCO tooling).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .boxes import BoundingBox, iou
from .coco import DatasetIndex
from .errors import ReferentialIntegrityError, ValidationError

COCO_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))

# Recall grid for 101-point interpolation: 0.00, 0.01, ..., 1.00.
RECALL_SAMPLES = np.arange(101) / 100.0

AP_MODES = ("riemann", "coco101")


@dataclass(frozen=True)
class Detection:
    """One predicted box with its confidence score."""

    image_id: int
    category_id: int
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionMatch:
    """Outcome for one detection, in descending-score processing order."""

    detection_index: int
    score: float
    is_tp: bool
    gt_index: int | None


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float


@dataclass(frozen=True)
class PRCurve:
    """Precision/recall at each detection-rank cutoff, best-ranked first."""

    points: tuple[PRPoint, ...]

    def __post_init__(self):
        last_recall = 0.0
        for p in self.points:
            if not (0.0 <= p.precision <= 1.0 and 0.0 <= p.recall <= 1.0):
                raise ValidationError(f"precision/recall out of range: {p}")
            if p.recall < last_recall:
                raise ValidationError("recall must be non-decreasing")
            last_recall = p.recall


@dataclass(frozen=True)
class APResult:
    """AP per IoU threshold and class, plus the averaged headline value.

    ``ap_50_95`` is the mean over thresholds, then over classes with at
    least one ground truth; it is ``None`` when no class has ground truth.
    """

    per_threshold: Mapping[float, Mapping[int, float]]
    ap_50_95: float | None

    @property
    def per_class(self) -> dict[int, float]:
        """Mean AP over thresholds for each evaluated class."""
        classes = sorted({c for per in self.per_threshold.values() for c in per})
        return {
            c: sum(per[c] for per in self.per_threshold.values()) / len(self.per_threshold)
            for c in classes
        }

    def to_dict(self, per_class: bool = False) -> dict:
        out: dict = {
            "ap_50_95": self.ap_50_95,
            "per_threshold": {
                f"{t:.2f}": {str(c): ap for c, ap in sorted(per.items())}
                for t, per in sorted(self.per_threshold.items())
            },
        }
        if per_class:
            out["per_class"] = {str(c): ap for c, ap in self.per_class.items()}
        return out


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[BoundingBox],
    iou_threshold: float,
) -> list[DetectionMatch]:
    """Greedy one-to-one matching of detections against ground truth.

    All inputs are assumed to share one image and one category. Score ties
    are broken by input order; IoU ties take the lowest ground-truth index.
    Returns one entry per detection, in descending-score order.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gts)
    matches: list[DetectionMatch] = []
    for i in order:
        best_iou = 0.0
        best_j = None
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            v = iou(dets[i].box, gt)
            if v >= iou_threshold and v > best_iou:
                best_iou, best_j = v, j
        if best_j is not None:
            taken[best_j] = True
        matches.append(
            DetectionMatch(
                detection_index=i,
                score=dets[i].score,
                is_tp=best_j is not None,
                gt_index=best_j,
            )
        )
    return matches


def precision_recall_curve(flags: Sequence[bool], num_gt: int) -> PRCurve:
    """Precision/recall after each detection rank.

    ``flags`` are TP/FP indicators ordered by descending score. A dataset
    with no ground truth yields an empty curve.
    """
    if num_gt < 0:
        raise ValidationError("num_gt must be non-negative")
    if num_gt == 0:
        return PRCurve(())
    points = []
    tp = 0
    for n, flag in enumerate(flags, start=1):
        tp += bool(flag)
        points.append(PRPoint(precision=tp / n, recall=tp / num_gt))
    return PRCurve(tuple(points))


def average_precision(curve: PRCurve, mode: str = "coco101") -> float:
    """Summarize a PR curve into a single AP value.

    ``riemann`` accumulates recall increments times raw precision;
    ``coco101`` samples the precision envelope on the 101-point recall grid.
    An empty curve scores 0 in both modes.
    """
    if mode not in AP_MODES:
        raise ValidationError(f"unknown AP mode {mode!r}, expected one of {AP_MODES}")
    if not curve.points:
        return 0.0
    if mode == "riemann":
        total = 0.0
        prev_recall = 0.0
        for p in curve.points:
            total += (p.recall - prev_recall) * p.precision
            prev_recall = p.recall
        return total
    precisions = np.array([p.precision for p in curve.points])
    recalls = np.array([p.recall for p in curve.points])
    # Envelope: best precision achievable at this recall or beyond.
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    idx = np.searchsorted(recalls, RECALL_SAMPLES, side="left")
    sampled = np.where(idx < len(recalls), envelope[np.minimum(idx, len(recalls) - 1)], 0.0)
    return float(sampled.mean())


def coco_map(
    detections: Sequence[Detection],
    index: DatasetIndex,
    split: str = "val",
    mode: str = "coco101",
    iou_thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    max_dets_per_image: int = 100,
) -> APResult:
    """Evaluate detections against the ground truth of one split.

    AP is computed per (class, IoU threshold); classes without ground truth
    in the split are excluded. Detections on images outside the split are
    ignored; detections referencing unknown ids are an error.
    """
    for d in detections:
        if d.image_id not in index.image_by_id:
            raise ReferentialIntegrityError(
                f"detection references missing image id {d.image_id}"
            )
        if d.category_id not in index.category_by_id:
            raise ReferentialIntegrityError(
                f"detection references missing category id {d.category_id}"
            )

    split_images = {im.image_id for im in index.images_in_split(split)}
    gts: dict[tuple[int, int], list[BoundingBox]] = defaultdict(list)
    gt_count: dict[int, int] = defaultdict(int)
    for ann in index.annotations:
        if ann.image_id in split_images:
            gts[(ann.image_id, ann.category_id)].append(ann.box)
            gt_count[ann.category_id] += 1

    dets_by_group: dict[tuple[int, int], list[tuple[int, Detection]]] = defaultdict(list)
    for i, d in enumerate(detections):
        if d.image_id in split_images:
            dets_by_group[(d.image_id, d.category_id)].append((i, d))
    for group in dets_by_group.values():
        group.sort(key=lambda t: (-t[1].score, t[0]))
        del group[max_dets_per_image:]

    eval_classes = sorted(gt_count)
    per_threshold: dict[float, dict[int, float]] = {t: {} for t in iou_thresholds}
    for c in eval_classes:
        images_c = sorted(
            {img for (img, cat) in set(gts) | set(dets_by_group) if cat == c}
        )
        for t in iou_thresholds:
            pooled: list[tuple[float, int, bool]] = []
            for img in images_c:
                group = dets_by_group.get((img, c), [])
                matches = match_detections(
                    [d for _, d in group], gts.get((img, c), []), t
                )
                for m in matches:
                    pooled.append((m.score, group[m.detection_index][0], m.is_tp))
            pooled.sort(key=lambda rec: (-rec[0], rec[1]))
            curve = precision_recall_curve([tp for _, _, tp in pooled], gt_count[c])
            per_threshold[t][c] = average_precision(curve, mode=mode)

    if eval_classes:
        per_class = {
            c: sum(per_threshold[t][c] for t in iou_thresholds) / len(iou_thresholds)
            for c in eval_classes
        }
        ap = sum(per_class.values()) / len(per_class)
    else:
        ap = None
    return APResult(per_threshold=per_threshold, ap_50_95=ap)


def parse_detections(raw: bytes | str) -> list[Detection]:
    """Load a COCO results file: a JSON array of detection records."""
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed detections JSON: {e.msg}") from e
    if not isinstance(doc, list):
        raise ValidationError("detections file must be a JSON array")
    dets = []
    for i, entry in enumerate(doc):
        try:
            x, y, w, h = (float(v) for v in entry["bbox"])
            dets.append(
                Detection(
                    image_id=entry["image_id"],
                    category_id=entry["category_id"],
                    box=BoundingBox(x, y, w, h),
                    score=float(entry["score"]),
                )
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"detections entry {i} is malformed: {e}") from e
    return dets
