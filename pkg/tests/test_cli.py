import json
import subprocess
import sys

import numpy as np
import pytest

from symbolspot import fixtures, raster

CLI = [sys.executable, "-m", "symbolspot.cli"]


def run_cli(*args, cwd=None):
    return subprocess.run(CLI + list(args), capture_output=True, text=True, cwd=cwd)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """Shared dir holding one generated fixture plus degenerate images."""
    d = tmp_path_factory.mktemp("cli")
    r = run_cli("gen-fixture", "--out", str(d / "fx"), "--seed", "5", "--classes", "4",
                "--instances", "10", "--noise", "30", "--lines", "3")
    assert r.returncode == 0, r.stderr
    raster.save_png(d / "blank.png", np.full((300, 300), 255, np.uint8))

    img, geom = fixtures.render_legend_table(["pump"], heading_rows=0)
    y0, y1 = geom.entries[0].band
    img[y0:y1, 1:-1] = 255
    word = fixtures.render_text("SPARE")
    img[y0 + 20 : y0 + 20 + word.shape[0], 30 : 30 + word.shape[1]] = word
    canvas = np.full((600, 600), 255, np.uint8)
    canvas[50 : 50 + img.shape[0], 40 : 40 + img.shape[1]] = img
    raster.save_png(d / "notable_rows.png", canvas)
    return d


def test_gen_fixture_writes_three_files(work):
    for suffix in (".png", ".gt.json", ".key.json"):
        assert (work / f"fx{suffix}").exists()
    key = json.loads((work / "fx.key.json").read_text())
    assert len(key["classes"]) == 4
    assert key["image_id"] == "fx"
    gt = json.loads((work / "fx.gt.json").read_text())
    assert len(gt["images"][0]["annotations"]) == 10


def test_gen_fixture_deterministic(work, tmp_path):
    r = run_cli("gen-fixture", "--out", str(tmp_path / "again"), "--seed", "5", "--classes", "4",
                "--instances", "10", "--noise", "30", "--lines", "3")
    assert r.returncode == 0
    assert (tmp_path / "again.png").read_bytes() == (work / "fx.png").read_bytes()
    a = json.loads((tmp_path / "again.gt.json").read_text())["images"][0]["annotations"]
    b = json.loads((work / "fx.gt.json").read_text())["images"][0]["annotations"]
    assert a == b  # ids differ (they follow the prefix), placements may not


def test_run_prints_report_json(work):
    r = run_cli("run", str(work / "fx.png"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert doc["image_id"] == "fx"
    assert sum(doc["counts"].values()) + doc["outliers"] == len(doc["detections"])


def test_run_with_ground_truth_prints_csv(work):
    r = run_cli("run", str(work / "fx.png"), "--ground-truth", str(work / "fx.gt.json"))
    assert r.returncode == 0, r.stderr
    lines = r.stdout.strip().splitlines()
    assert lines[0] == "image_id,present,detected,detected_correct,classified_correct"
    assert lines[1] == "fx,10,10,10,10"
    assert lines[2] == "Total,10,10,10,10"


def test_run_writes_outputs_and_audit(work, tmp_path):
    out = tmp_path / "out"
    r = run_cli("run", str(work / "fx.png"), "--out", str(out), "--audit",
                "--ground-truth", str(work / "fx.gt.json"))
    assert r.returncode == 0, r.stderr
    assert (out / "fx.report.json").exists()
    assert (out / "eval.csv").exists()
    assert (out / "audit" / "fx" / "table.png").exists()
    assert (out / "audit" / "fx" / "overlay.png").exists()
    doc = json.loads((out / "fx.report.json").read_text())
    assert doc["entries"][0]["symbol_png"] == "fx/sym_00.png"


def test_eval_subcommand(work, tmp_path):
    out = tmp_path / "out"
    assert run_cli("run", str(work / "fx.png"), "--out", str(out)).returncode == 0
    r = run_cli("eval", str(out / "fx.report.json"), "--ground-truth", str(work / "fx.gt.json"))
    assert r.returncode == 0, r.stderr
    assert "fx,10,10,10,10" in r.stdout
    csv_path = tmp_path / "scores.csv"
    r = run_cli("eval", str(out / "fx.report.json"), "--ground-truth", str(work / "fx.gt.json"),
                "--out", str(csv_path))
    assert r.returncode == 0
    assert csv_path.read_text().strip().endswith("Total,10,10,10,10")


def test_exit_code_for_missing_table(work):
    r = run_cli("run", str(work / "blank.png"))
    assert r.returncode == 2
    assert "legend-locator" in r.stderr


def test_exit_code_for_empty_table(work):
    r = run_cli("run", str(work / "notable_rows.png"))
    assert r.returncode == 3
    assert "legend-parser" in r.stderr


def test_exit_code_for_unreadable_input(work):
    r = run_cli("run", str(work / "nosuch.png"))
    assert r.returncode == 1
    assert "error" in r.stderr


def test_exit_code_for_bad_config(work, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"thresold": 1}))
    r = run_cli("--config", str(p), "run", str(work / "fx.png"))
    assert r.returncode == 4
    assert "unknown config keys" in r.stderr
    p.write_text("{broken")
    assert run_cli("--config", str(p), "run", str(work / "fx.png")).returncode == 4


def test_config_flag_after_subcommand(work, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"score_mode": "fraction"}))
    r = run_cli("run", str(work / "fx.png"), "--config", str(p),
                "--ground-truth", str(work / "fx.gt.json"))
    assert r.returncode == 0, r.stderr
    assert "fx,10,10,10,10" in r.stdout


def test_usage_errors_exit_64(work):
    assert run_cli().returncode == 64
    assert run_cli("run", "--no-such-flag").returncode == 64
    assert run_cli("frobnicate").returncode == 64


def test_run_audit_requires_out(work):
    r = run_cli("run", str(work / "fx.png"), "--audit")
    assert r.returncode == 1
    assert "--out" in r.stderr


def test_run_no_images(work):
    r = run_cli("run")
    assert r.returncode == 1
    assert "no input images" in r.stderr


def test_parse_table_subcommand(tmp_path):
    img, _ = fixtures.render_legend_table(["pump", "tank", "valve"], heading_rows=1)
    raster.save_png(tmp_path / "table.png", img)
    r = run_cli("parse-table", str(tmp_path / "table.png"), "--out", str(tmp_path / "crops"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert [e["class_id"] for e in doc["entries"]] == [0, 1, 2]
    for e in doc["entries"]:
        assert raster.load_png(e["symbol_png"]).shape == tuple(e["symbol_size"])


def test_parse_table_empty_exits_3(tmp_path):
    raster.save_png(tmp_path / "blank.png", np.full((120, 200), 255, np.uint8))
    assert run_cli("parse-table", str(tmp_path / "blank.png")).returncode == 3


def test_match_subcommand(tmp_path):
    g = fixtures.build_glyphs()["pump"]
    raster.save_png(tmp_path / "q.png", g)
    raster.save_png(tmp_path / "t.png", g)
    r = run_cli("match", str(tmp_path / "q.png"), str(tmp_path / "t.png"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert doc["s"] == 1.0
    assert doc["n"] == doc["m"] > 0
    assert doc["score_mode"] == "piecewise"


def test_detection_sidecar_only_run(work, tmp_path):
    out = tmp_path / "out"
    assert run_cli("run", str(work / "fx.png"), "--out", str(out)).returncode == 0
    rep = json.loads((out / "fx.report.json").read_text())
    dets = [dict(kind="table", confidence=1.0, **rep["table"]["box"])]
    dets += [dict(kind="symbol", confidence=d["confidence"], **d["box"]) for d in rep["detections"]]
    (tmp_path / "dets.json").write_text(json.dumps({"images": [{"id": "fx", "detections": dets}]}))
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"use_classical_table": False, "use_classical_detector": False}))
    r = run_cli("--config", str(cfgp), "run", str(work / "fx.png"),
                "--detections", str(tmp_path / "dets.json"))
    assert r.returncode == 0, r.stderr
    doc = json.loads(r.stdout)
    assert doc["counts"] == rep["counts"]
    assert doc["table"]["method"] == "external"


def test_version_flag():
    r = run_cli("--version")
    assert r.returncode == 0
    assert "symbolspot" in r.stdout
