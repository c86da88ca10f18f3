"""CLI contracts: subcommands, exit codes, artifacts."""

import json

import pytest

from emistrip import (
    AttackSpec,
    BayerPattern,
    RgbImage,
    build_manifest,
    inject,
    save_manifest,
    save_png,
)
from emistrip.cli import main

COLORS = [(200, 40, 90), (60, 180, 40), (30, 70, 210)]


def write_json(path, data):
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")


def build_demo_dataset(root, n_pairs=3, drop_rows=(6,)):
    root.mkdir(parents=True, exist_ok=True)
    for k in range(n_pairs):
        img = RgbImage.constant(32, 32, COLORS[k % len(COLORS)])
        save_png(img, root / f"{k:04d}_clean.png")
        attacked, _ = inject(img, BayerPattern.RGGB, AttackSpec.explicit(drop_rows))
        save_png(attacked, root / f"{k:04d}_attack.png")
    images = [{"id": k, "file_name": f"{k:04d}_clean.png"} for k in range(n_pairs)]
    annotations = [
        {"id": k, "image_id": k, "category_id": 2, "bbox": [2.0, 2.0, 10.0, 10.0]}
        for k in range(n_pairs)
    ]
    categories = [
        {"id": 1, "name": "person"},
        {"id": 2, "name": "car"},
        {"id": 3, "name": "truck"},
        {"id": 4, "name": "bus"},
    ]
    write_json(root / "annotations.json",
               {"images": images, "categories": categories, "annotations": annotations})
    manifest = build_manifest(root, name="demo")
    save_manifest(manifest, root / "manifest.json")
    return manifest


def detections_file(path, names, boxes_per_name):
    images = [{"id": k, "file_name": name} for k, name in enumerate(names)]
    detections = []
    for k, name in enumerate(names):
        for bbox, score in boxes_per_name.get(name, ()):
            detections.append(
                {"image_id": k, "category_id": 2, "bbox": list(bbox), "score": score}
            )
    write_json(path, {"images": images, "detections": detections})


# ------------------------------------------------------------------ attack ----


def attack_manifest(path, entries, attack=None, **extra):
    data = {"pattern": "RGGB", "attack": attack or {"mode": "explicit", "rows": [6]},
            "entries": entries}
    data.update(extra)
    write_json(path, data)


def test_attack_produces_png_and_record_per_entry(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    for k in range(3):
        save_png(RgbImage.constant(16, 16, COLORS[k]), src / f"in{k}.png")
    manifest = tmp_path / "batch.json"
    attack_manifest(
        manifest,
        [{"input": f"in{k}.png", "output": f"out{k}.png"} for k in range(3)],
    )
    out = tmp_path / "out"
    code = main(["attack", "--manifest", str(manifest), "--root", str(src), "--out", str(out)])
    assert code == 0
    for k in range(3):
        assert (out / f"out{k}.png").exists()
        record = json.loads((out / f"out{k}.json").read_text())
        assert record["dropped_rows"] == [6]
        assert record["strip_bands"] == [[6, 16]]
    assert (out / "run_config.json").exists()


def test_attack_is_deterministic_across_runs(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    save_png(RgbImage.constant(16, 16, (120, 20, 230)), src / "a.png")
    manifest = tmp_path / "batch.json"
    attack_manifest(
        manifest,
        [{"input": "a.png", "output": "a_attacked.png"}],
        attack={"mode": "stochastic", "p_row": 0.2, "seed": 11},
    )
    outs = []
    for name in ("out1", "out2"):
        out = tmp_path / name
        assert main(["attack", "--manifest", str(manifest), "--root", str(src),
                     "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("a_attacked.png", "a_attacked.json", "run_config.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_attack_without_manifest_exits_2(tmp_path, capsys):
    code = main(["attack", "--out", str(tmp_path / "out")])
    assert code == 2
    assert "--manifest" in capsys.readouterr().err


def test_attack_missing_input_exits_2_naming_file(tmp_path, capsys):
    manifest = tmp_path / "batch.json"
    attack_manifest(manifest, [{"input": "ghost.png", "output": "x.png"}])
    code = main(["attack", "--manifest", str(manifest), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "ghost.png" in capsys.readouterr().err


def test_attack_honors_dataset_root_env_var(tmp_path, monkeypatch):
    src = tmp_path / "elsewhere"
    src.mkdir()
    save_png(RgbImage.constant(16, 16, (1, 2, 3)), src / "a.png")
    manifest = tmp_path / "batch.json"
    attack_manifest(manifest, [{"input": "a.png", "output": "a_attacked.png"}])
    monkeypatch.setenv("EMISTRIP_DATASET_ROOT", str(src))
    out = tmp_path / "out"
    assert main(["attack", "--manifest", str(manifest), "--out", str(out)]) == 0
    assert (out / "a_attacked.png").exists()


def test_attack_seed_flag_overrides_manifest(tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    save_png(RgbImage.constant(16, 16, (120, 20, 230)), src / "a.png")
    manifest = tmp_path / "batch.json"
    attack_manifest(
        manifest,
        [{"input": "a.png", "output": "a.png"}],
        attack={"mode": "stochastic", "p_row": 0.3, "seed": 1},
    )
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    main(["attack", "--manifest", str(manifest), "--root", str(src), "--out", str(out1)])
    main(["attack", "--manifest", str(manifest), "--root", str(src), "--out", str(out2),
          "--seed", "999"])
    r1 = json.loads((out1 / "a.json").read_text())
    r2 = json.loads((out2 / "a.json").read_text())
    assert r1["seed"] == 1
    assert r2["seed"] == 999


# ---------------------------------------------------------------- evaluate ----


def eval_fixture(tmp_path, hide_in_pairs=()):
    root = tmp_path / "data"
    manifest = build_demo_dataset(root)
    gt_box = (2.0, 2.0, 10.0, 10.0)
    clean_names = [p.non_attack_image for p in manifest.pairs]
    attack_names = [p.under_attack_image for p in manifest.pairs]
    clean_hits = {name: [(gt_box, 0.9)] for name in clean_names}
    attacked_hits = {
        name: ([] if k in hide_in_pairs else [(gt_box, 0.9)])
        for k, name in enumerate(attack_names)
    }
    detections_file(root / "dets_clean.json", clean_names, clean_hits)
    detections_file(root / "dets_attacked.json", attack_names, attacked_hits)
    return root


def test_evaluate_identical_conditions_sr_zero(tmp_path):
    root = eval_fixture(tmp_path)
    out = tmp_path / "out"
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--out", str(out), "--model-name", "perfect",
    ])
    assert code == 0
    ev = json.loads((out / "evaluation.json").read_text())
    assert ev["non_attack"]["map"] == ev["under_attack"]["map"] == 1.0
    assert ev["effects"]["success_rate"] == 0.0
    assert ev["dataset"] == "demo"
    assert ev["model"] == "perfect"


def test_evaluate_hiding_gives_fraction_sr_and_warning_exit(tmp_path):
    root = eval_fixture(tmp_path, hide_in_pairs=(0,))
    out = tmp_path / "out"
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--out", str(out),
    ])
    assert code == 0  # car predictions still exist in the attacked condition
    ev = json.loads((out / "evaluation.json").read_text())
    assert ev["effects"]["success_rate"] == pytest.approx(1 / 3)
    assert ev["effects"]["hiding_totals"]["car"] == 1
    assert ev["under_attack"]["map"] < ev["non_attack"]["map"]


def test_evaluate_warning_exit_code_when_class_unpredicted(tmp_path):
    root = eval_fixture(tmp_path, hide_in_pairs=(0, 1, 2))  # nothing predicted under attack
    out = tmp_path / "out"
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--out", str(out),
    ])
    assert code == 1
    ev = json.loads((out / "evaluation.json").read_text())
    assert ev["under_attack"]["no_prediction_classes"] == ["car"]


def test_evaluate_missing_detection_coverage_exits_2(tmp_path, capsys):
    root = eval_fixture(tmp_path)
    # rewrite the attacked file without the last image
    manifest = build_demo_dataset(root := tmp_path / "data2")
    names = [p.under_attack_image for p in manifest.pairs][:-1]
    detections_file(root / "dets_attacked.json", names, {})
    clean_names = [p.non_attack_image for p in manifest.pairs]
    detections_file(root / "dets_clean.json", clean_names,
                    {n: [((2.0, 2.0, 10.0, 10.0), 0.9)] for n in clean_names})
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "0002_attack.png" in capsys.readouterr().err


def test_evaluate_class_subset_from_config(tmp_path):
    root = eval_fixture(tmp_path)
    cfg = tmp_path / "run.json"
    write_json(cfg, {"metrics": {"classes": ["car", "truck"]}})
    out = tmp_path / "out"
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--config", str(cfg), "--out", str(out),
    ])
    assert code == 0
    ev = json.loads((out / "evaluation.json").read_text())
    assert ev["metrics"]["classes"] == ["car", "truck"]
    assert set(ev["effects"]["hiding_totals"]) == {"car", "truck"}


def test_evaluate_rejects_unknown_class_in_config(tmp_path, capsys):
    root = eval_fixture(tmp_path)
    cfg = tmp_path / "run.json"
    write_json(cfg, {"metrics": {"classes": ["car", "bicycle"]}})
    code = main([
        "evaluate", "--manifest", str(root / "manifest.json"),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--config", str(cfg), "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "bicycle" in capsys.readouterr().err


def test_evaluate_accepts_dataset_directory(tmp_path):
    root = eval_fixture(tmp_path)
    out = tmp_path / "out"
    code = main([
        "evaluate", "--manifest", str(root),
        "--clean", str(root / "dets_clean.json"),
        "--attacked", str(root / "dets_attacked.json"),
        "--out", str(out),
    ])
    assert code == 0


# ------------------------------------------------------------------ report ----


def evaluation_payload(dataset="AUT", model="faster", sr=26 / 94):
    return {
        "dataset": dataset,
        "model": model,
        "metrics": {"iou_threshold": 0.5, "confidence_threshold": 0.5},
        "non_attack": {"map": 0.676, "mean_precision": 0.95, "mean_recall": 0.9,
                       "per_class_ap": {}, "no_prediction_classes": []},
        "under_attack": {"map": 0.505, "mean_precision": 0.913, "mean_recall": 0.793,
                         "per_class_ap": {}, "no_prediction_classes": []},
        "effects": {
            "per_pair": [],
            "success_rate": sr,
            "creating_totals": {"person": 0, "car": 2, "truck": 0, "bus": 1},
            "hiding_totals": {"person": 21, "car": 6, "truck": 7, "bus": 1},
        },
    }


def test_report_renders_fixed_precision_percentages(tmp_path):
    ev_path = tmp_path / "evaluation.json"
    write_json(ev_path, evaluation_payload())
    out = tmp_path / "out"
    code = main(["report", "--evaluation", str(ev_path), "--format", "markdown",
                 "--out", str(out)])
    assert code == 0
    effects = (out / "report_effects.md").read_text()
    assert "| 27.66% | 91.3% | 79.3% |" in effects
    table = (out / "report_map.md").read_text()
    assert "| AUT | faster | 67.6% | 50.5% |" in table


def test_report_sr_rendering_matches_closed_form(tmp_path):
    cases = [(26 / 94, "27.66%"), (52 / 85, "61.18%"), (5 / 94, "5.32%"), (6 / 85, "7.06%"),
             (0.0, "0.00%")]
    for k, (sr, expected) in enumerate(cases):
        ev_path = tmp_path / f"e{k}.json"
        write_json(ev_path, evaluation_payload(sr=sr))
        out = tmp_path / f"out{k}"
        assert main(["report", "--evaluation", str(ev_path), "--out", str(out)]) == 0
        assert expected in (out / "report_effects.md").read_text()


def test_report_csv_format(tmp_path):
    ev_path = tmp_path / "evaluation.json"
    write_json(ev_path, evaluation_payload())
    out = tmp_path / "out"
    assert main(["report", "--evaluation", str(ev_path), "--format", "csv",
                 "--out", str(out)]) == 0
    csv = (out / "report_effects.csv").read_text()
    assert "AUT,faster,21,6,7,1,0,2,0,1,27.66%,91.3%,79.3%" in csv


def test_report_malformed_input_exits_2(tmp_path, capsys):
    ev_path = tmp_path / "evaluation.json"
    write_json(ev_path, {"dataset": "AUT"})
    code = main(["report", "--evaluation", str(ev_path), "--out", str(tmp_path / "out")])
    assert code == 2


# --------------------------------------------------------------- stripdiff ----


def test_stripdiff_reports_injected_band(tmp_path, capsys):
    img = RgbImage.constant(32, 32, (200, 40, 90))
    attacked, _ = inject(img, BayerPattern.RGGB, AttackSpec.explicit({10}))
    save_png(img, tmp_path / "clean.png")
    save_png(attacked, tmp_path / "attacked.png")
    report = tmp_path / "bands.json"
    code = main(["stripdiff", str(tmp_path / "clean.png"), str(tmp_path / "attacked.png"),
                 "--threshold", "8.0", "--out", str(report)])
    assert code == 0
    bands = json.loads(report.read_text())["bands"]
    assert len(bands) == 1
    assert abs(bands[0][0] - 10) <= 1 and bands[0][1] == 32


def test_stripdiff_identical_pair_is_empty(tmp_path, capsys):
    img = RgbImage.constant(16, 16, (9, 9, 9))
    save_png(img, tmp_path / "a.png")
    code = main(["stripdiff", str(tmp_path / "a.png"), str(tmp_path / "a.png")])
    assert code == 0
    assert "no corrupted rows" in capsys.readouterr().out


def test_stripdiff_dimension_mismatch_exits_2(tmp_path, capsys):
    save_png(RgbImage.constant(16, 16, (9, 9, 9)), tmp_path / "a.png")
    save_png(RgbImage.constant(16, 18, (9, 9, 9)), tmp_path / "b.png")
    code = main(["stripdiff", str(tmp_path / "a.png"), str(tmp_path / "b.png")])
    assert code == 2
    assert "differ in size" in capsys.readouterr().err
