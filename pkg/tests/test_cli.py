import csv
import json
import os

import numpy as np
import pytest

import dentreg.ident as ident
from dentreg.cli import CHECKPOINT_FILE, cmd_compare, main
from dentreg.config import RunConfig, validate
from dentreg.reporting import GREEN, green_fraction, overlay_image

FAST = {"optimizer": {"generations": 30}}


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "coh"), "--counts", "1,1,1", "--seed", "4"]) == 0
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(FAST))
    out = root / "run"
    assert main(["compare", "--manifest", str(root / "coh" / "manifest.json"),
                 "--config", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    return root


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_compare_writes_nine_rows(cohort):
    rows = _rows(cohort / "run" / "scores.csv")
    assert len(rows) == 9 and {r["method"] for r in rows} == {"regions"}
    meta = (cohort / "run" / "metadata.jsonl").read_text().splitlines()
    assert len(meta) == 9 and all(json.loads(m)["params"] for m in meta)


def test_resume_completes_only_missing_cells(cohort, tmp_path, monkeypatch):
    out = tmp_path / "resume"
    out.mkdir()
    lines = (cohort / "run" / CHECKPOINT_FILE).read_text().splitlines(keepends=True)
    # header, four finished cells and a torn fifth line
    (out / CHECKPOINT_FILE).write_text("".join(lines[:5]) + lines[5][:40])
    calls = []
    real = ident.evaluate_cell

    def counting(am, pm, settings):
        calls.append((am.id, pm.id))
        return real(am, pm, settings)

    monkeypatch.setattr(ident, "evaluate_cell", counting)
    cfg = RunConfig.from_dict(FAST).with_overrides(out_dir=str(out), workers=1)
    cmd_compare(str(cohort / "coh" / "manifest.json"), cfg)
    assert len(calls) == 5
    assert (out / "scores.csv").read_bytes() == (cohort / "run" / "scores.csv").read_bytes()


def test_checkpoint_from_other_run_is_refused(cohort, tmp_path):
    out = tmp_path / "other"
    out.mkdir()
    (out / CHECKPOINT_FILE).write_text('{"fingerprint": "nope"}\n')
    code = main(["compare", "--manifest", str(cohort / "coh" / "manifest.json"),
                 "--out", str(out), "--method", "landmarks-set1"])
    assert code == 1


def test_report_outputs(cohort, tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "--manifest", str(cohort / "coh" / "manifest.json"),
                 "--scores", str(cohort / "run" / "scores.csv"), "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    validate(doc, "report")
    for name in ("statistics.csv", "positions.csv", "cmc.csv", "cmc.png", "lr.csv",
                 "density.csv", "density.png"):
        assert (out / name).stat().st_size > 0
    assert _rows(out / "lr.csv")[0].keys() >= {"am_id", "pm_id", "score", "LR", "log10LR"}


def _write_scores(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ident.SCORE_COLUMNS)
        for a, p, s in rows:
            w.writerow([a, p, "regions", repr(s), 0, 0, 1])


def test_report_refuses_partial_matrix(cohort, tmp_path, capsys):
    scores = tmp_path / "s.csv"
    _write_scores(scores, [("S000", "S000", 0.01), ("S000", "S001", 0.2)])
    args = ["report", "--manifest", str(cohort / "coh" / "manifest.json"),
            "--scores", str(scores), "--out", str(tmp_path / "r")]
    assert main(args) == 2
    assert "allow-partial" in capsys.readouterr().err
    assert main(args + ["--allow-partial"]) == 0


def test_uninformative_scores_give_unit_cllr(cohort, tmp_path):
    ids = ["S000", "S001", "S002"]
    scores = tmp_path / "s.csv"
    _write_scores(scores, [(a, p, 0.5) for a in ids for p in ids])
    assert main(["lr", "--manifest", str(cohort / "coh" / "manifest.json"),
                 "--scores", str(scores), "--out", str(tmp_path / "r")]) == 0
    value = json.loads((tmp_path / "r" / "cllr.json").read_text())["cllr"]
    assert abs(value - 1.0) < 1e-12


def test_overlay_at_solved_params(cohort, tmp_path):
    from PIL import Image

    from dentreg.config import load_manifest
    from dentreg.mesh import load_mesh, rasterize_silhouette
    from dentreg.regfit import load_segmentation, score_region_comparison

    man = cohort / "coh" / "manifest.json"
    m = load_manifest(man)
    seg = load_segmentation(m.am[0].segmentation)
    mesh = load_mesh(m.pm[0].mesh)
    ic = RunConfig().intrinsics.with_image_size(seg.width, seg.height)
    solved = score_region_comparison(seg, mesh, ic, n_restarts=1)
    params = tmp_path / "params.json"
    params.write_text(json.dumps(solved.params.to_dict()))
    png = tmp_path / "o.png"
    args = ["overlay", "--manifest", str(man), "--am", "S000", "--pm", "S000",
            "--params", str(params), "--out", str(tmp_path)]
    assert main(args + ["--png", str(png)]) == 0
    sil = rasterize_silhouette(mesh, solved.params, ic)
    keep = ~seg.occlusion
    img = np.asarray(Image.open(png))
    assert green_fraction(img, seg.roi & keep, sil & keep) >= 0.9
    png2 = tmp_path / "o2.png"
    assert main(args + ["--png", str(png2)]) == 0
    assert png.read_bytes() == png2.read_bytes()


def test_overlay_from_stored_metadata(cohort, tmp_path):
    png = tmp_path / "o.png"
    assert main(["overlay", "--manifest", str(cohort / "coh" / "manifest.json"), "--am", "S001",
                 "--pm", "S002", "--out", str(cohort / "run"), "--png", str(png)]) == 0
    assert png.stat().st_size > 0


def test_overlay_without_params(cohort, tmp_path):
    # no metadata in an empty output directory
    code = main(["overlay", "--manifest", str(cohort / "coh" / "manifest.json"), "--am", "S000",
                 "--pm", "S001", "--out", str(tmp_path)])
    assert code == 2


def test_overlay_identical_and_disjoint():
    a = np.zeros((20, 20), bool)
    a[5:15, 5:15] = True
    img = overlay_image(a, a)
    green = np.all(img == GREEN, axis=-1)
    assert green.sum() == a.sum()
    assert not np.any(np.all(img == (255, 0, 0), axis=-1) | np.all(img == (0, 0, 255), axis=-1))
    b = np.zeros_like(a)
    b[0:3, 0:3] = True
    img = overlay_image(a, b)
    assert not np.any(np.all(img == GREEN, axis=-1))


def test_synth_refuses_overwrite(tmp_path):
    args = ["synth", "--out", str(tmp_path / "c"), "--counts", "1,0,0"]
    assert main(args) == 0
    assert main(args) == 1
    assert main(args + ["--force"]) == 0


def test_synth_rejects_empty_counts(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "c"), "--counts", "0,0,0"]) == 1


def test_usage_errors(tmp_path):
    assert main(["compare"]) == 1
    assert main(["frobnicate"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"optimizer": {"generations": 0}}')
    assert main(["compare", "--manifest", "m.json", "--config", str(bad)]) == 1


def test_manifest_error_names_case(cohort, tmp_path, capsys):
    man = json.loads((cohort / "coh" / "manifest.json").read_text())
    man["pm"][1]["mesh"] = "pm/gone.obj"
    for entry in man["am"] + man["pm"]:
        for key in ("segmentation", "landmarks", "mesh"):
            if entry.get(key):
                entry[key] = os.path.join(str(cohort / "coh"), entry[key])
    path = tmp_path / "m.json"
    path.write_text(json.dumps(man))
    assert main(["compare", "--manifest", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "S001" in capsys.readouterr().err


def test_config_round_trip():
    cfg = RunConfig.from_dict({"method": "landmarks-set2", "seed": 3,
                               "solver": {"rmse_mode": "literal"}, "lr": {"bandwidth": 0.1}})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.compare_settings().optimizer.seed == 3
