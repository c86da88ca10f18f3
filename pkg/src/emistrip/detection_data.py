"""Paired-image datasets, ground-truth annotations, and detector outputs.

Annotations and detections use a documented COCO-style JSON subset: an
``images`` table (id, file_name), a ``categories`` table (id, name), and
records carrying ``bbox`` as [x, y, w, h] with top-left origin.  The class
set is closed: person, car, truck, bus.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import median
from typing import Dict, List, Optional, Sequence

from .errors import IngestionError, ManifestError, ParameterError
from .metrics import iou
from .types import BoundingBox, ClassId, Detection, GroundTruthObject

DEFAULT_CATEGORY_NAMES = {1: "person", 2: "car", 3: "truck", 4: "bus"}
CLEAN_SUFFIX = "_clean.png"
ATTACK_SUFFIX = "_attack.png"


@dataclass(frozen=True)
class ImagePair:
    """One Non-Attack/Under-Attack capture of the same scene with shared truth."""

    pair_id: str
    non_attack_image: str
    under_attack_image: str
    ground_truth: tuple

    def __post_init__(self):
        ids = [g.id for g in self.ground_truth]
        if len(ids) != len(set(ids)):
            raise IngestionError(f"pair {self.pair_id}: duplicate ground-truth ids")
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    pairs: tuple

    def __post_init__(self):
        ids = [p.pair_id for p in self.pairs]
        if len(ids) != len(set(ids)):
            raise ManifestError(f"manifest {self.name}: duplicate pair ids")
        object.__setattr__(self, "pairs", tuple(self.pairs))


def _class_from_name(name: str, record: str) -> ClassId:
    try:
        return ClassId(name)
    except ValueError:
        raise IngestionError(f"{record}: unknown category {name!r} "
                             f"(closed set: {[c.value for c in ClassId]})") from None


def _box_from_record(bbox, record: str) -> BoundingBox:
    try:
        x, y, w, h = (float(v) for v in bbox)
    except (TypeError, ValueError):
        raise IngestionError(f"{record}: bbox must be [x, y, w, h], got {bbox!r}") from None
    if not all(math.isfinite(v) for v in (x, y, w, h)):
        raise IngestionError(f"{record}: bbox has non-finite coordinates {bbox!r}")
    if w <= 0 or h <= 0:
        raise IngestionError(f"{record}: bbox has non-positive size {bbox!r}")
    return BoundingBox(x, y, w, h)


def _read_json(path) -> object:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise IngestionError(f"annotation file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: not valid JSON ({exc})") from None


def _category_names(data: dict, path) -> Dict[int, str]:
    cats = data.get("categories")
    if cats is None:
        return dict(DEFAULT_CATEGORY_NAMES)
    out = {}
    for cat in cats:
        try:
            out[int(cat["id"])] = str(cat["name"])
        except (KeyError, TypeError, ValueError):
            raise IngestionError(f"{path}: malformed category record {cat!r}") from None
    return out


def _image_names(data: dict, path) -> Optional[Dict[int, str]]:
    images = data.get("images")
    if images is None:
        return None
    out = {}
    for img in images:
        try:
            out[int(img["id"])] = str(img["file_name"])
        except (KeyError, TypeError, ValueError):
            raise IngestionError(f"{path}: malformed image record {img!r}") from None
    return out


def load_annotations(path) -> Dict[str, List[GroundTruthObject]]:
    """Load COCO-style ground truth, keyed by image file name.

    Only images that carry at least one annotation appear in the result.
    """
    data = _read_json(path)
    if not isinstance(data, dict) or "annotations" not in data:
        raise IngestionError(f"{path}: expected an object with an 'annotations' list")
    images = _image_names(data, path)
    if images is None:
        raise IngestionError(f"{path}: annotations require an 'images' table")
    categories = _category_names(data, path)
    out: Dict[str, List[GroundTruthObject]] = {}
    seen_ids: Dict[str, set] = {}
    for ann in data["annotations"]:
        record = f"{path}: annotation {ann.get('id', '?')}"
        try:
            image_id = int(ann["image_id"])
            category_id = int(ann["category_id"])
        except (KeyError, TypeError, ValueError):
            raise IngestionError(f"{record}: missing image_id/category_id") from None
        if image_id not in images:
            raise IngestionError(f"{record}: unknown image_id {image_id}")
        if category_id not in categories:
            raise IngestionError(f"{record}: unknown category_id {category_id}")
        cls = _class_from_name(categories[category_id], record)
        box = _box_from_record(ann.get("bbox"), record)
        name = images[image_id]
        gt_id = str(ann.get("id", len(out.get(name, []))))
        bucket = seen_ids.setdefault(name, set())
        if gt_id in bucket:
            raise IngestionError(f"{record}: duplicate annotation id {gt_id} in {name}")
        bucket.add(gt_id)
        out.setdefault(name, []).append(GroundTruthObject(gt_id, box, cls))
    return out


def load_detections(path, categories: Optional[Dict[int, str]] = None) -> Dict[str, List[Detection]]:
    """Load detector outputs, grouped per image in file order.

    Accepts either a dict with ``images`` / ``categories`` / ``detections``
    (or ``annotations``) keys, or a bare COCO-results list.  Keys are image
    file names when an ``images`` table is present, else the raw image_id as
    a string.  Out-of-range confidence is an error, not a clamp.
    """
    data = _read_json(path)
    if isinstance(data, dict):
        records = data.get("detections", data.get("annotations"))
        if records is None:
            raise IngestionError(f"{path}: expected 'detections' (or 'annotations') list")
        images = _image_names(data, path)
        names = _category_names(data, path)
    elif isinstance(data, list):
        records = data
        images = None
        names = dict(DEFAULT_CATEGORY_NAMES)
    else:
        raise IngestionError(f"{path}: expected an object or a list")
    if categories is not None:
        names = dict(categories)
    out: Dict[str, List[Detection]] = {}
    if images is not None:
        # coverage semantics: every listed image is covered, even with no hits
        for name in images.values():
            out.setdefault(name, [])
    for i, rec in enumerate(records):
        record = f"{path}: detection #{i}"
        try:
            image_id = int(rec["image_id"])
            category_id = int(rec["category_id"])
            score = float(rec["score"])
        except (KeyError, TypeError, ValueError):
            raise IngestionError(f"{record}: missing image_id/category_id/score") from None
        if images is not None:
            if image_id not in images:
                raise IngestionError(f"{record}: unknown image_id {image_id}")
            key = images[image_id]
        else:
            key = str(image_id)
        if category_id not in names:
            raise IngestionError(f"{record}: unknown category_id {category_id}")
        cls = _class_from_name(names[category_id], record)
        box = _box_from_record(rec.get("bbox"), record)
        if not 0.0 <= score <= 1.0:
            raise IngestionError(f"{record}: confidence {score} outside [0, 1]")
        out.setdefault(key, []).append(Detection(box, cls, score))
    return out


def merge_majority_vote(
    annotator_sets: Sequence[Sequence[GroundTruthObject]], iou_threshold: float = 0.5
) -> List[GroundTruthObject]:
    """Fuse independent annotator passes into one ground-truth set.

    Annotations are clustered greedily in a canonical (class, box) order:
    each joins the best same-class cluster whose running coordinate-wise
    median box overlaps it with IoU >= threshold (at most one box per
    annotator per cluster), else starts a new cluster.  Clusters voted by a
    strict majority of annotators survive; overlapping survivors of the same
    class are then consolidated so the output is maximal.  The result is
    invariant to the order the annotator sets are given in.
    """
    if len(annotator_sets) < 3:
        raise ParameterError(f"majority vote needs >= 3 annotator sets, got {len(annotator_sets)}")
    if not 0.0 < iou_threshold <= 1.0:
        raise ParameterError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    n_annotators = len(annotator_sets)

    items = [(obj, ai) for ai, objs in enumerate(annotator_sets) for obj in objs]
    items.sort(key=lambda t: (t[0].class_id.value, t[0].box.x, t[0].box.y, t[0].box.w, t[0].box.h))

    clusters: List[dict] = []
    for obj, ai in items:
        best = None
        best_iou = 0.0
        for cl in clusters:
            if cl["class_id"] is not obj.class_id or ai in cl["annotators"]:
                continue
            overlap = iou(obj.box, cl["median"])
            if overlap >= iou_threshold and overlap > best_iou:
                best, best_iou = cl, overlap
        if best is None:
            clusters.append(
                {"class_id": obj.class_id, "boxes": [obj.box], "annotators": {ai}, "median": obj.box}
            )
        else:
            best["boxes"].append(obj.box)
            best["annotators"].add(ai)
            best["median"] = _median_box(best["boxes"])

    kept = [cl for cl in clusters if 2 * len(cl["annotators"]) > n_annotators]
    kept = _consolidate(kept, iou_threshold)
    kept.sort(key=lambda cl: (cl["class_id"].value, cl["median"].x, cl["median"].y,
                              cl["median"].w, cl["median"].h))
    return [
        GroundTruthObject(f"merged-{k}", cl["median"], cl["class_id"])
        for k, cl in enumerate(kept)
    ]


def _median_box(boxes: Sequence[BoundingBox]) -> BoundingBox:
    return BoundingBox(
        median(b.x for b in boxes),
        median(b.y for b in boxes),
        median(b.w for b in boxes),
        median(b.h for b in boxes),
    )


def _consolidate(clusters: List[dict], iou_threshold: float) -> List[dict]:
    # merge kept clusters until no same-class pair overlaps at the threshold
    merged = True
    clusters = [dict(cl) for cl in clusters]
    while merged:
        merged = False
        clusters.sort(key=lambda cl: (cl["class_id"].value, cl["median"].x, cl["median"].y))
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                a, b = clusters[i], clusters[j]
                if a["class_id"] is not b["class_id"]:
                    continue
                if iou(a["median"], b["median"]) >= iou_threshold:
                    a["boxes"].extend(b["boxes"])
                    a["annotators"] |= b["annotators"]
                    a["median"] = _median_box(a["boxes"])
                    del clusters[j]
                    merged = True
                    break
            if merged:
                break
    return clusters


def build_manifest(
    root,
    name: Optional[str] = None,
    annotations: str = "annotations.json",
    clean_suffix: str = CLEAN_SUFFIX,
    attack_suffix: str = ATTACK_SUFFIX,
) -> DatasetManifest:
    """Scan a dataset directory laid out as ``<id>_clean.png`` / ``<id>_attack.png``.

    Ground truth comes from the clean image's entry in the annotation file
    (the scene is shared, so one annotation set serves both images).  Any
    image without its partner fails the build, naming the orphans.
    """
    root = Path(root)
    if not root.is_dir():
        raise ManifestError(f"dataset root {root} is not a directory")
    clean = {}
    attack = {}
    for entry in sorted(root.iterdir()):
        if entry.name.endswith(clean_suffix):
            clean[entry.name[: -len(clean_suffix)]] = entry.name
        elif entry.name.endswith(attack_suffix):
            attack[entry.name[: -len(attack_suffix)]] = entry.name
    orphans = sorted(
        [clean[k] for k in clean.keys() - attack.keys()]
        + [attack[k] for k in attack.keys() - clean.keys()]
    )
    if orphans:
        raise ManifestError(f"unpaired images in {root}: {', '.join(orphans)}")
    ann_path = root / annotations
    truth = load_annotations(ann_path) if ann_path.exists() else {}
    pairs = tuple(
        ImagePair(
            pair_id=key,
            non_attack_image=clean[key],
            under_attack_image=attack[key],
            ground_truth=tuple(truth.get(clean[key], ())),
        )
        for key in sorted(clean)
    )
    return DatasetManifest(name=name or root.name, pairs=pairs)


def save_manifest(manifest: DatasetManifest, path) -> None:
    data = {
        "name": manifest.name,
        "pairs": [
            {
                "pair_id": p.pair_id,
                "non_attack_image": p.non_attack_image,
                "under_attack_image": p.under_attack_image,
                "ground_truth": [
                    {
                        "id": g.id,
                        "bbox": [g.box.x, g.box.y, g.box.w, g.box.h],
                        "category": g.class_id.value,
                    }
                    for g in p.ground_truth
                ],
            }
            for p in manifest.pairs
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> DatasetManifest:
    data = _read_json(path)
    if not isinstance(data, dict) or "pairs" not in data:
        raise ManifestError(f"{path}: expected a manifest object with 'pairs'")
    pairs = []
    for rec in data["pairs"]:
        record = f"{path}: pair {rec.get('pair_id', '?')}"
        truth = tuple(
            GroundTruthObject(
                str(g["id"]),
                _box_from_record(g.get("bbox"), record),
                _class_from_name(str(g.get("category")), record),
            )
            for g in rec.get("ground_truth", ())
        )
        pairs.append(
            ImagePair(
                pair_id=str(rec["pair_id"]),
                non_attack_image=str(rec["non_attack_image"]),
                under_attack_image=str(rec["under_attack_image"]),
                ground_truth=truth,
            )
        )
    return DatasetManifest(name=str(data.get("name", "dataset")), pairs=tuple(pairs))
