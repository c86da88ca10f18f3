"""Command-line entry points: attack, evaluate, report, stripdiff.

Exit codes: 0 success, 1 evaluation completed with warnings (e.g. classes
that received no predictions), 2 input or configuration error.  Relative
paths inside manifests resolve against the dataset root, taken from --root,
the config file, the EMISTRIP_DATASET_ROOT environment variable, or the
manifest's own directory, in that order.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .attack_injector import (
    AttackDeviceMetadata,
    AttackSpec,
    detect_strips,
    inject,
)
from .detection_data import build_manifest, load_detections, load_manifest
from .errors import EmistripError, EvaluationError, IngestionError, ParameterError
from .imageio import load_png, save_png
from .metrics import (
    CLASSES,
    EffectOverrides,
    classify_effects,
    evaluate_dataset,
    success_rate,
)
from .report import FORMATS, render_effects_table, render_map_table
from .sensor_model import BayerPattern
from .types import BoundingBox, ClassId

ENV_DATASET_ROOT = "EMISTRIP_DATASET_ROOT"

DEFAULT_METRICS = {"iou_threshold": 0.5, "confidence_threshold": 0.5}


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path, what: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise IngestionError(f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: not valid JSON ({exc})") from None


def _load_run_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    cfg = _read_json(Path(path), "config file")
    if not isinstance(cfg, dict):
        raise IngestionError(f"{path}: config must be a JSON object")
    metrics = {**DEFAULT_METRICS, **cfg.get("metrics", {})}
    if not 0.0 < metrics["iou_threshold"] <= 1.0:
        raise ParameterError(f"config iou_threshold outside (0, 1]: {metrics['iou_threshold']}")
    if not 0.0 <= metrics["confidence_threshold"] <= 1.0:
        raise ParameterError(
            f"config confidence_threshold outside [0, 1]: {metrics['confidence_threshold']}"
        )
    if "classes" in metrics:
        try:
            metrics["classes"] = [ClassId(name) for name in metrics["classes"]]
        except ValueError as exc:
            raise ParameterError(f"config classes: {exc}") from None
        if not metrics["classes"]:
            raise ParameterError("config classes must not be empty")
    fmt = cfg.get("report_format", "markdown")
    if fmt not in FORMATS:
        raise ParameterError(f"config report_format must be one of {FORMATS}, got {fmt!r}")
    cfg = dict(cfg)
    cfg["metrics"] = metrics
    cfg["report_format"] = fmt
    return cfg


def _resolve_root(arg_root: Optional[str], cfg: dict, fallback: Path) -> Path:
    for candidate in (arg_root, cfg.get("dataset_root"), os.environ.get(ENV_DATASET_ROOT)):
        if candidate:
            root = Path(candidate)
            if not root.is_dir():
                raise ParameterError(f"dataset root is not a directory: {root}")
            return root
    return fallback


def _out_dir(args, cfg: dict) -> Path:
    out = Path(args.out or cfg.get("output_dir") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- attack ----


def _entry_spec(attack: dict, entry: dict, base_seed: Optional[int], index: int,
                resync: Optional[int]) -> AttackSpec:
    mode = attack.get("mode")
    if "rows" in entry:
        return AttackSpec.explicit(entry["rows"], resync)
    if mode == "explicit":
        return AttackSpec.explicit(attack.get("rows", ()), resync)
    if mode == "stochastic":
        p_row = attack.get("p_row")
        if p_row is None:
            raise ParameterError("stochastic attack needs p_row")
        if "seed" in entry:
            seed = int(entry["seed"])
        elif base_seed is not None:
            # distinct deterministic stream per entry
            seed = int(base_seed) + index
        else:
            raise ParameterError("stochastic attack needs a seed (manifest or --seed)")
        return AttackSpec.stochastic(float(p_row), seed, resync)
    raise ParameterError(f"attack mode must be 'explicit' or 'stochastic', got {mode!r}")


def cmd_attack(args) -> int:
    cfg = _load_run_config(args.config)
    manifest_arg = args.manifest or cfg.get("manifest")
    if not manifest_arg:
        raise ParameterError("attack needs --manifest (or config 'manifest')")
    manifest_path = Path(manifest_arg)
    data = _read_json(manifest_path, "batch manifest")
    root = _resolve_root(args.root, cfg, manifest_path.parent)
    out_dir = _out_dir(args, cfg)

    try:
        pattern = BayerPattern(data.get("pattern", "RGGB"))
    except ValueError:
        raise ParameterError(f"unknown Bayer pattern {data.get('pattern')!r}") from None
    attack = data.get("attack")
    if not isinstance(attack, dict):
        raise ParameterError(f"{manifest_path}: missing 'attack' object")
    resync = data.get("resync_interval")
    fill = data.get("fill", "replicate")
    device = data.get("device")
    device_meta = AttackDeviceMetadata(**device) if device else None
    base_seed = args.seed if args.seed is not None else attack.get("seed")
    entries = data.get("entries")
    if not entries:
        raise ParameterError(f"{manifest_path}: no entries to attack")

    for index, entry in enumerate(entries):
        if "input" not in entry or "output" not in entry:
            raise ParameterError(f"{manifest_path}: entry #{index} needs input and output")
        spec = _entry_spec(attack, entry, base_seed, index, resync)
        in_path = root / entry["input"]
        if not in_path.exists():
            raise IngestionError(f"input image not found: {in_path}")
        image = load_png(in_path)
        attacked, result = inject(image, pattern, spec, fill=fill)
        out_path = out_dir / entry["output"]
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_png(attacked, out_path)
        record = {
            "input": entry["input"],
            "output": entry["output"],
            "pattern": pattern.value,
            "mode": "explicit" if spec.is_explicit else "stochastic",
            "p_row": spec.p_row,
            "seed": spec.seed,
            "resync_interval": resync,
            "fill": fill,
            "dropped_rows": list(result.dropped_rows),
            "strip_bands": [list(b) for b in result.strip_bands],
            "device": device,
        }
        record_name = entry.get("record", str(Path(entry["output"]).with_suffix("")) + ".json")
        _write_json(out_dir / record_name, record)

    _write_json(
        out_dir / "run_config.json",
        {
            "command": "attack",
            "manifest": str(args.manifest or cfg.get("manifest")),
            "pattern": pattern.value,
            "attack": attack,
            "seed": base_seed,
            "resync_interval": resync,
            "fill": fill,
            "metrics": cfg.get("metrics", DEFAULT_METRICS),
        },
    )
    print(f"attacked {len(entries)} image(s) -> {out_dir}")
    return 0


# -------------------------------------------------------------- evaluate ----


def _summary_dict(summary) -> dict:
    return {
        "map": summary.map,
        "mean_precision": summary.mean_precision,
        "mean_recall": summary.mean_recall,
        "per_class_ap": {cls.value: ap for cls, ap in summary.per_class_ap.items()},
        "no_prediction_classes": [cls.value for cls in summary.no_prediction_classes],
    }


def _pair_overrides(cfg: dict) -> dict:
    out = {}
    for rec in cfg.get("metrics", {}).get("overrides", ()):
        ignore_creating = tuple(
            (ClassId(o["category"]), BoundingBox(*o["bbox"]))
            for o in rec.get("ignore_creating", ())
        )
        out[str(rec["pair_id"])] = EffectOverrides(
            ignore_hiding_gt_ids=tuple(rec.get("ignore_hiding_gt_ids", ())),
            ignore_creating=ignore_creating,
        )
    return out


def cmd_evaluate(args) -> int:
    cfg = _load_run_config(args.config)
    metrics_cfg = cfg.get("metrics", dict(DEFAULT_METRICS))
    iou_thr = float(metrics_cfg["iou_threshold"])
    conf_thr = float(metrics_cfg["confidence_threshold"])
    classes = tuple(metrics_cfg.get("classes", CLASSES))

    manifest_arg = args.manifest or cfg.get("manifest")
    if not manifest_arg:
        raise ParameterError("evaluate needs --manifest (or config 'manifest')")
    manifest_path = Path(manifest_arg)
    if manifest_path.is_dir():
        manifest = build_manifest(manifest_path)
    else:
        manifest = load_manifest(manifest_path)
    dets_clean = load_detections(args.clean)
    dets_attacked = load_detections(args.attacked)

    missing = [p.non_attack_image for p in manifest.pairs if p.non_attack_image not in dets_clean]
    missing += [
        p.under_attack_image for p in manifest.pairs if p.under_attack_image not in dets_attacked
    ]
    if missing:
        raise EvaluationError("missing detections for: " + ", ".join(sorted(missing)))

    scenes_clean = {
        p.non_attack_image: (dets_clean[p.non_attack_image], p.ground_truth)
        for p in manifest.pairs
    }
    scenes_attacked = {
        p.under_attack_image: (dets_attacked[p.under_attack_image], p.ground_truth)
        for p in manifest.pairs
    }
    summary_na = evaluate_dataset(scenes_clean, conf_thr, iou_thr, classes=classes)
    summary_ua = evaluate_dataset(scenes_attacked, conf_thr, iou_thr, classes=classes)

    overrides = _pair_overrides(cfg)
    reports = [
        classify_effects(
            p,
            dets_clean[p.non_attack_image],
            dets_attacked[p.under_attack_image],
            iou_thr,
            conf_thr,
            overrides=overrides.get(p.pair_id),
            classes=classes,
        )
        for p in manifest.pairs
    ]
    sr = success_rate(reports)
    creating_totals = {cls.value: 0 for cls in classes}
    hiding_totals = {cls.value: 0 for cls in classes}
    for rep in reports:
        for cls, n in rep.creating_fp.items():
            creating_totals[cls.value] += n
        for cls, n in rep.hiding_fn.items():
            hiding_totals[cls.value] += n

    out_dir = _out_dir(args, cfg)
    evaluation = {
        "dataset": args.dataset_name or manifest.name,
        "model": args.model_name or "detector",
        "metrics": {"iou_threshold": iou_thr, "confidence_threshold": conf_thr,
                    "classes": [cls.value for cls in classes]},
        "non_attack": _summary_dict(summary_na),
        "under_attack": _summary_dict(summary_ua),
        "effects": {
            "per_pair": [
                {
                    "pair_id": rep.pair_id,
                    "creating_fp": {cls.value: n for cls, n in rep.creating_fp.items()},
                    "hiding_fn": {cls.value: n for cls, n in rep.hiding_fn.items()},
                    "attack_success": rep.attack_success,
                }
                for rep in reports
            ],
            "success_rate": sr,
            "creating_totals": creating_totals,
            "hiding_totals": hiding_totals,
        },
    }
    _write_json(out_dir / "evaluation.json", evaluation)
    _write_json(
        out_dir / "run_config.json",
        {
            "command": "evaluate",
            "manifest": str(args.manifest),
            "metrics": {"iou_threshold": iou_thr, "confidence_threshold": conf_thr},
            "dataset": evaluation["dataset"],
            "model": evaluation["model"],
        },
    )

    warned = sorted(
        {cls.value for cls in summary_na.no_prediction_classes}
        | {cls.value for cls in summary_ua.no_prediction_classes}
    )
    print(
        f"evaluated {len(manifest.pairs)} pair(s): "
        f"mAP {summary_na.map:.4f} -> {summary_ua.map:.4f}, SR {sr:.4f}"
    )
    if warned:
        print(f"warning: no predictions for class(es): {', '.join(warned)}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------- report ----


def cmd_report(args) -> int:
    cfg = _load_run_config(args.config)
    fmt = args.format or cfg.get("report_format", "markdown")
    if fmt not in FORMATS:
        raise ParameterError(f"--format must be one of {FORMATS}, got {fmt!r}")
    out_dir = _out_dir(args, cfg)
    map_entries = []
    effect_entries = []
    for path in args.evaluation:
        ev = _read_json(Path(path), "evaluation output")
        try:
            map_entries.append(
                {
                    "dataset": ev["dataset"],
                    "model": ev["model"],
                    "non_attack_map": ev["non_attack"]["map"],
                    "under_attack_map": ev["under_attack"]["map"],
                }
            )
            effect_entries.append(
                {
                    "dataset": ev["dataset"],
                    "model": ev["model"],
                    "hiding_fn": ev["effects"]["hiding_totals"],
                    "creating_fp": ev["effects"]["creating_totals"],
                    "success_rate": ev["effects"]["success_rate"],
                    "mean_precision": ev["under_attack"]["mean_precision"],
                    "mean_recall": ev["under_attack"]["mean_recall"],
                }
            )
        except (KeyError, TypeError) as exc:
            raise IngestionError(f"{path}: malformed evaluation output ({exc})") from None
    ext = "md" if fmt == "markdown" else "csv"
    (out_dir / f"report_map.{ext}").write_text(render_map_table(map_entries, fmt), encoding="utf-8")
    (out_dir / f"report_effects.{ext}").write_text(
        render_effects_table(effect_entries, fmt), encoding="utf-8"
    )
    print(f"wrote report_map.{ext} and report_effects.{ext} -> {out_dir}")
    return 0


# -------------------------------------------------------------- stripdiff ----


def cmd_stripdiff(args) -> int:
    clean = load_png(Path(args.clean))
    attacked = load_png(Path(args.attacked))
    bands = detect_strips(clean, attacked, args.threshold)
    for start, end in bands:
        print(f"{start} {end}")
    if not bands:
        print("no corrupted rows detected")
    if args.out:
        _write_json(
            Path(args.out),
            {"threshold": args.threshold, "bands": [list(b) for b in bands]},
        )
    return 0


# ------------------------------------------------------------------ main ----


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emistrip",
        description="Simulate row-loss EMI corruption on Bayer camera images "
        "and evaluate paired object-detection impact.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="corrupt a batch of images per a manifest")
    p_attack.add_argument("--manifest", help="batch manifest JSON")
    p_attack.add_argument("--config", help="run configuration JSON")
    p_attack.add_argument("--seed", type=int, help="override the stochastic base seed")
    p_attack.add_argument("--out", help="output directory")
    p_attack.add_argument("--root", help="dataset root for relative input paths")
    p_attack.set_defaults(func=cmd_attack)

    p_eval = sub.add_parser("evaluate", help="score paired detections against ground truth")
    p_eval.add_argument("--manifest", help="dataset manifest JSON, or a dataset directory")
    p_eval.add_argument("--clean", required=True, help="Non-Attack detections JSON")
    p_eval.add_argument("--attacked", required=True, help="Under-Attack detections JSON")
    p_eval.add_argument("--config", help="run configuration JSON")
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--dataset-name", help="dataset label for reports")
    p_eval.add_argument("--model-name", help="model label for reports")
    p_eval.set_defaults(func=cmd_evaluate)

    p_report = sub.add_parser("report", help="render evaluation outputs as tables")
    p_report.add_argument(
        "--evaluation", action="append", required=True, help="evaluation JSON (repeatable)"
    )
    p_report.add_argument("--format", choices=FORMATS, help="table format")
    p_report.add_argument("--config", help="run configuration JSON")
    p_report.add_argument("--out", help="output directory")
    p_report.set_defaults(func=cmd_report)

    p_strip = sub.add_parser("stripdiff", help="locate corrupted row bands in a capture pair")
    p_strip.add_argument("clean", help="Non-Attack PNG")
    p_strip.add_argument("attacked", help="Under-Attack PNG")
    p_strip.add_argument("--threshold", type=float, default=5.0,
                         help="mean per-row absolute difference threshold (default 5.0)")
    p_strip.add_argument("--out", help="band report JSON path")
    p_strip.set_defaults(func=cmd_stripdiff)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmistripError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
