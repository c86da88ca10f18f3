"""Detection quality metrics and attack-effect accounting.

mAP follows the COCO convention: per-class average precision with 101-point
interpolation over the recall grid 0.00..1.00, averaged over the IoU
thresholds 0.50:0.05:0.95 and over the classes present in the ground truth.
Effect accounting compares a Non-Attack/Under-Attack detection pair against
shared ground truth: false positives created by the attack and true objects
it hides, with a per-pair success flag feeding the attack success rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, PairingError
from .types import CLASSES, BoundingBox, ClassId, Detection, GroundTruthObject

MAP_IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_GRID = tuple(i / 100.0 for i in range(101))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint, 1 iff identical."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class MatchSlice:
    """Matching outcome for one image, one class, one IoU threshold.

    Detection indices refer to positions in the detection list that was
    matched (its ingestion order).
    """

    class_id: ClassId
    iou_threshold: float
    tp: tuple  # ((detection index, matched gt id), ...)
    fp: tuple  # (detection index, ...)
    fn: tuple  # (gt id, ...)


def match_detections(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    class_id: ClassId,
    iou_threshold: float,
) -> MatchSlice:
    """Greedy confidence-ordered matching for one class.

    Detections of the class are visited in descending confidence (ties keep
    ingestion order) and each takes the unmatched ground-truth object of
    highest IoU >= threshold (IoU ties go to the earliest object).  Leftover
    detections are FPs, leftover ground truth FNs.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ParameterError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    det_idx = [i for i, d in enumerate(detections) if d.class_id is class_id]
    det_idx.sort(key=lambda i: -detections[i].confidence)
    gts = [g for g in ground_truth if g.class_id is class_id]
    taken = [False] * len(gts)
    tp: List[Tuple[int, str]] = []
    fp: List[int] = []
    for i in det_idx:
        best = -1
        best_iou = 0.0
        for k, g in enumerate(gts):
            if taken[k]:
                continue
            overlap = iou(detections[i].box, g.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best, best_iou = k, overlap
        if best >= 0:
            taken[best] = True
            tp.append((i, gts[best].id))
        else:
            fp.append(i)
    fn = tuple(g.id for k, g in enumerate(gts) if not taken[k])
    return MatchSlice(class_id, iou_threshold, tuple(tp), tuple(fp), fn)


def average_precision(scored: Sequence[Tuple[float, bool]], n_gt: int) -> float:
    """101-point interpolated AP from (confidence, is_tp) records.

    Records are sorted by descending confidence (stable, so equal confidences
    keep their given order); precision at each recall grid point is the
    maximum precision among curve points of recall >= the grid point.
    """
    if n_gt < 1:
        raise ParameterError("average precision needs at least one ground-truth object")
    if not scored:
        return 0.0
    order = sorted(range(len(scored)), key=lambda i: -scored[i][0])
    flags = np.array([scored[i][1] for i in order], bool)
    tp_cum = np.cumsum(flags)
    fp_cum = np.cumsum(~flags)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, np.array(RECALL_GRID), side="left")
    values = np.where(idx < len(recall), envelope[np.minimum(idx, len(recall) - 1)], 0.0)
    return float(values.mean())


Scene = Tuple[Sequence[Detection], Sequence[GroundTruthObject]]


@dataclass(frozen=True)
class MatchResult:
    """All match slices for a dataset, keyed by (image, class, iou threshold)."""

    slices: dict

    def slice(self, image: str, class_id: ClassId, iou_threshold: float) -> MatchSlice:
        return self.slices[(image, class_id, iou_threshold)]


def match_dataset(
    scenes: Mapping[str, Scene],
    iou_thresholds: Sequence[float] = MAP_IOU_THRESHOLDS,
    classes: Sequence[ClassId] = CLASSES,
) -> MatchResult:
    """Match every image at every class and threshold, checking conservation."""
    slices = {}
    for image, (dets, gts) in scenes.items():
        for cls in classes:
            n_det = sum(1 for d in dets if d.class_id is cls)
            n_gt = sum(1 for g in gts if g.class_id is cls)
            for thr in iou_thresholds:
                sl = match_detections(dets, gts, cls, thr)
                assert len(sl.tp) + len(sl.fp) == n_det
                assert len(sl.tp) + len(sl.fn) == n_gt
                slices[(image, cls, thr)] = sl
    return MatchResult(slices)


def _pooled_records(
    scenes: Mapping[str, Scene], class_id: ClassId, iou_threshold: float
) -> Tuple[List[Tuple[float, bool]], int]:
    """Dataset-wide (confidence, is_tp) pool and GT count for one class/threshold."""
    records: List[Tuple[float, bool]] = []
    n_gt = 0
    for dets, gts in scenes.values():
        n_gt += sum(1 for g in gts if g.class_id is class_id)
        sl = match_detections(dets, gts, class_id, iou_threshold)
        verdict = {i: True for i, _ in sl.tp}
        verdict.update({i: False for i in sl.fp})
        for i in sorted(verdict):  # ingestion order within the image
            records.append((dets[i].confidence, verdict[i]))
    return records, n_gt


def class_average_precision(
    scenes: Mapping[str, Scene], class_id: ClassId, iou_threshold: float
) -> Optional[float]:
    """AP for one class at one threshold; None when the class has no ground truth."""
    records, n_gt = _pooled_records(scenes, class_id, iou_threshold)
    if n_gt == 0:
        return None
    return average_precision(records, n_gt)


def mean_ap(
    scenes: Mapping[str, Scene],
    iou_thresholds: Sequence[float] = MAP_IOU_THRESHOLDS,
    classes: Sequence[ClassId] = CLASSES,
) -> float:
    """AP averaged over the threshold grid and over GT-present classes."""
    per_class = per_class_mean_ap(scenes, iou_thresholds, classes)
    if not per_class:
        raise ParameterError("mean AP needs at least one class with ground truth")
    return float(np.mean(list(per_class.values())))


def per_class_mean_ap(
    scenes: Mapping[str, Scene],
    iou_thresholds: Sequence[float] = MAP_IOU_THRESHOLDS,
    classes: Sequence[ClassId] = CLASSES,
) -> Dict[ClassId, float]:
    out: Dict[ClassId, float] = {}
    for cls in classes:
        aps = [class_average_precision(scenes, cls, thr) for thr in iou_thresholds]
        if aps[0] is None:  # class absent from ground truth at every threshold
            continue
        out[cls] = float(np.mean(aps))
    return out


@dataclass(frozen=True)
class PrecisionRecall:
    mean_precision: float
    mean_recall: float
    no_prediction_classes: tuple  # GT-present classes with zero predictions
    per_class_precision: dict
    per_class_recall: dict


def mean_precision_recall(
    scenes: Mapping[str, Scene],
    confidence_threshold: float = 0.5,
    iou_threshold: float = 0.5,
    classes: Sequence[ClassId] = CLASSES,
) -> PrecisionRecall:
    """Class-mean precision and recall at a fixed operating point.

    Detections below the confidence threshold are discarded first.  Mean
    precision averages TP/(TP+FP) over classes that made at least one
    prediction; if no class predicted anything, it is reported as 0 with the
    affected classes flagged.  Mean recall averages TP/(TP+FN) over classes
    present in the ground truth.
    """
    if not 0.0 <= confidence_threshold <= 1.0:
        raise ParameterError(f"confidence_threshold must be in [0, 1], got {confidence_threshold}")
    totals = {cls: [0, 0, 0] for cls in classes}  # tp, fp, fn
    for dets, gts in scenes.values():
        kept = [d for d in dets if d.confidence >= confidence_threshold]
        for cls in classes:
            sl = match_detections(kept, gts, cls, iou_threshold)
            totals[cls][0] += len(sl.tp)
            totals[cls][1] += len(sl.fp)
            totals[cls][2] += len(sl.fn)
    precisions = {}
    recalls = {}
    flagged = []
    for cls, (tp, fp, fn) in totals.items():
        if tp + fp > 0:
            precisions[cls] = tp / (tp + fp)
        if tp + fn > 0:
            recalls[cls] = tp / (tp + fn)
            if tp + fp == 0:
                flagged.append(cls)
    mp = float(np.mean(list(precisions.values()))) if precisions else 0.0
    mr = float(np.mean(list(recalls.values()))) if recalls else 0.0
    return PrecisionRecall(
        mean_precision=mp,
        mean_recall=mr,
        no_prediction_classes=tuple(flagged),
        per_class_precision=precisions,
        per_class_recall=recalls,
    )


@dataclass(frozen=True)
class EvalSummary:
    """Headline quality numbers for one detection condition over a dataset."""

    map: float
    mean_precision: float
    mean_recall: float
    per_class_ap: dict
    no_prediction_classes: tuple = ()

    def __post_init__(self):
        for name in ("map", "mean_precision", "mean_recall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} out of [0, 1]: {v}")
        for cls, v in self.per_class_ap.items():
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"AP[{cls}] out of [0, 1]: {v}")


def evaluate_dataset(
    scenes: Mapping[str, Scene],
    confidence_threshold: float = 0.5,
    pr_iou_threshold: float = 0.5,
    iou_thresholds: Sequence[float] = MAP_IOU_THRESHOLDS,
    classes: Sequence[ClassId] = CLASSES,
) -> EvalSummary:
    """Full summary: mAP on all detections, MP/MR at the operating point."""
    per_class = per_class_mean_ap(scenes, iou_thresholds, classes)
    if not per_class:
        raise ParameterError("evaluation needs at least one class with ground truth")
    pr = mean_precision_recall(scenes, confidence_threshold, pr_iou_threshold, classes)
    return EvalSummary(
        map=float(np.mean(list(per_class.values()))),
        mean_precision=pr.mean_precision,
        mean_recall=pr.mean_recall,
        per_class_ap=per_class,
        no_prediction_classes=pr.no_prediction_classes,
    )


@dataclass(frozen=True)
class EffectReport:
    """Attack-attributable detection changes for one image pair."""

    pair_id: str
    creating_fp: dict  # ClassId -> count of FPs the attack created
    hiding_fn: dict  # ClassId -> count of objects the attack hid
    attack_success: bool

    def __post_init__(self):
        total = sum(self.creating_fp.values()) + sum(self.hiding_fn.values())
        if self.attack_success != (total > 0):
            raise ParameterError("attack_success must equal (any effect count > 0)")


@dataclass(frozen=True)
class EffectOverrides:
    """Manual attribution overrides, mirroring a human filtering pass."""

    ignore_hiding_gt_ids: tuple = ()
    ignore_creating: tuple = ()  # ((ClassId, BoundingBox), ...)


def classify_effects(
    pair,
    dets_clean: Sequence[Detection],
    dets_attacked: Sequence[Detection],
    iou_threshold: float = 0.5,
    confidence_threshold: float = 0.5,
    overrides: Optional[EffectOverrides] = None,
    clean_image: Optional[str] = None,
    attacked_image: Optional[str] = None,
    classes: Sequence[ClassId] = CLASSES,
) -> EffectReport:
    """Count creating and hiding effects for one Non-Attack/Under-Attack pair.

    A creating effect is a false positive in the attacked image with no
    same-class detection of IoU >= threshold anywhere in the clean image's
    detections (so detector mistakes present in both are not attributed to
    the attack).  A hiding effect is a ground-truth object matched in the
    clean image but missed in the attacked one.
    """
    if clean_image is not None and clean_image != pair.non_attack_image:
        raise PairingError(
            f"pair {pair.pair_id}: clean detections are for {clean_image!r}, "
            f"expected {pair.non_attack_image!r}"
        )
    if attacked_image is not None and attacked_image != pair.under_attack_image:
        raise PairingError(
            f"pair {pair.pair_id}: attacked detections are for {attacked_image!r}, "
            f"expected {pair.under_attack_image!r}"
        )
    overrides = overrides or EffectOverrides()
    clean = [d for d in dets_clean if d.confidence >= confidence_threshold]
    attacked = [d for d in dets_attacked if d.confidence >= confidence_threshold]
    gts = pair.ground_truth
    creating = {cls: 0 for cls in classes}
    hiding = {cls: 0 for cls in classes}
    for cls in classes:
        sl_clean = match_detections(clean, gts, cls, iou_threshold)
        sl_attacked = match_detections(attacked, gts, cls, iou_threshold)
        clean_tp_ids = {gt_id for _, gt_id in sl_clean.tp}
        for gt_id in sl_attacked.fn:
            if gt_id in clean_tp_ids and gt_id not in overrides.ignore_hiding_gt_ids:
                hiding[cls] += 1
        clean_boxes = [d.box for d in clean if d.class_id is cls]
        for i in sl_attacked.fp:
            box = attacked[i].box
            if any(iou(box, cb) >= iou_threshold for cb in clean_boxes):
                continue  # same mistake exists without the attack
            if any(
                ocls is cls and iou(box, obox) >= iou_threshold
                for ocls, obox in overrides.ignore_creating
            ):
                continue
            creating[cls] += 1
    total = sum(creating.values()) + sum(hiding.values())
    return EffectReport(
        pair_id=pair.pair_id,
        creating_fp=creating,
        hiding_fn=hiding,
        attack_success=total > 0,
    )


def success_rate(reports: Sequence[EffectReport]) -> float:
    """Fraction of pairs in which at least one attack effect manifested."""
    if not reports:
        raise ParameterError("success rate needs at least one effect report")
    return sum(1 for r in reports if r.attack_success) / len(reports)
