import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from camlens.cli import main
from camlens.image import load_image, save_image
from camlens.resample import degrade_bicubic

from conftest import smooth_image


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--out", str(d), "--n-scenes", "4", "--gauss", "5,1.2", "--seed", "3"]) == 0
    return d


def test_degrade_city_geometry(tmp_path, capsys, rng):
    save_image(smooth_image(rng, 1218, 870), tmp_path / "hr.png")
    code, out, _ = run(capsys, "degrade", "--in", tmp_path / "hr.png", "--scale", 2.9, "--model", "bicubic",
                       "--out", tmp_path / "lr.png")
    assert code == 0
    assert load_image(tmp_path / "lr.png").shape == (300, 420, 3)
    assert json.loads(out)["width"] == 420


def test_degrade_gaussian_preset_and_profile(tmp_path, capsys, rng):
    save_image(smooth_image(rng, 96, 72), tmp_path / "hr.png", 16)
    code, _, _ = run(capsys, "degrade", "--in", tmp_path / "hr.png", "--profile", "phone", "--model", "gaussian",
                     "--gauss", "k7", "--bit-depth", "16", "--out", tmp_path / "lr.png")
    assert code == 0 and load_image(tmp_path / "lr.png").shape == (30, 40, 3)


def test_metrics_identical(tmp_path, capsys, rng):
    save_image(smooth_image(rng, 32, 32), tmp_path / "x.png")
    code, out, _ = run(capsys, "metrics", "--a", tmp_path / "x.png", "--b", tmp_path / "x.png")
    assert code == 0
    obj = json.loads(out)
    assert obj["psnr_db"] == "inf" and obj["ssim"] == pytest.approx(1.0, abs=1e-9)


def test_sweep_csv_rows(synth_dir, tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--data", synth_dir, "--k", "3,5,7,9", "--sigma", "0.5:4.0:0.05",
                       "--out", tmp_path / "sweep.csv", "--threads", 2)
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep.csv").open()))
    assert rows[0] == ["k", "sigma", "mean_psnr_db", "n_scenes"] and len(rows) == 1 + 4 * 71
    best = json.loads(out)["best"]
    assert [(b["k"], b["sigma"]) for b in best] == [(5, 1.2)]


def test_sweep_threads_from_env(synth_dir, tmp_path, capsys, monkeypatch):
    args = ["sweep", "--data", synth_dir, "--k", "3,5", "--sigma", "1.0,1.2"]
    _, one, _ = run(capsys, *args)
    monkeypatch.setenv("CAMLENS_THREADS", "3")
    _, three, _ = run(capsys, *args)
    assert one == three and one.startswith("k,sigma")


def test_compare_and_eval(synth_dir, tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--data", synth_dir, "--gauss", "5,1.2", "--out", tmp_path / "c.json")
    assert code == 0
    rep = json.loads((tmp_path / "c.json").read_text())
    assert rep == json.loads(out) and len(rep["scenes"]) == 4
    assert abs(rep["mean"]["gaussian"]["psnr_db"] - rep["mean"]["realistic"]["psnr_db"]) < 0.01
    code, out, _ = run(capsys, "eval", "--baseline", "interp", "--data", synth_dir)
    obj = json.loads(out)
    assert code == 0 and obj["split"] == "test" and obj["n_scenes"] == 1


def test_train_sr_eval_roundtrip(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"steps": 3, "patch": 32, "batch-size": 2, "depth": 3, "width": 4}))
    ck = tmp_path / "m.ckpt"
    argv = ["train", "--data", synth_dir, "--out", ck, "--config", cfg, "--degradation", "camera", "--seed", 4]
    code, out, _ = run(capsys, *argv)
    assert code == 0 and json.loads(out)["steps"] == 3
    first = ck.read_bytes()
    run(capsys, *argv)
    assert ck.read_bytes() == first
    # explicit flags beat config values
    code, out, _ = run(capsys, *argv[:-2], "--steps", 1)
    assert json.loads(out)["steps"] == 1
    code, out, _ = run(capsys, "sr", "--model", ck, "--in", synth_dir / "000_lr.png", "--out", tmp_path / "sr.png")
    assert code == 0 and load_image(tmp_path / "sr.png").shape == (174, 232, 3)
    code, out, _ = run(capsys, "eval", "--model", ck, "--data", synth_dir, "--split", "all")
    assert code == 0 and json.loads(out)["n_scenes"] == 4


def test_rectify_command(tmp_path, capsys):
    raw = tmp_path / "raw"
    assert main(["synth", "--out", str(raw), "--n-scenes", "2", "--gauss", "7,1.55", "--phase", "1",
                 "--shift", "2.3,-1.1", "--bias", "-0.03", "--color", "0.05,0.9", "--checker", "4x6",
                 "--seed", "11"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "rectify", "--data", raw, "--out", tmp_path / "rect", "--degree", 1)
    assert code == 0
    summary = json.loads(out)["scenes"]
    for s in summary.values():
        assert s["post_psnr_db"] > s["pre_psnr_db"]
        assert abs(s["shift"][0] - 2.3) < 0.1 and abs(s["shift"][1] + 1.1) < 0.1
    report = json.loads((tmp_path / "rect" / "rectify_report.json").read_text())
    assert report["000"]["calibration"]["degree"] == 1
    assert sorted(p.name for p in (tmp_path / "rect").iterdir())[:2] == ["000_hr.png", "000_lr.png"]


def test_synth_identity_chain(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "--out", tmp_path / "d", "--n-scenes", 1, "--seed", 2)
    lr, hr = load_image(tmp_path / "d" / "000_lr.png"), load_image(tmp_path / "d" / "000_hr.png")
    assert code == 0 and np.abs(lr - degrade_bicubic(hr, 2.9)).max() <= 0.5 / 65535 + 1e-12


def test_inputs_not_mutated(synth_dir, tmp_path, capsys):
    before = {p.name: p.read_bytes() for p in synth_dir.iterdir() if p.is_file()}
    run(capsys, "compare", "--data", synth_dir)
    run(capsys, "sweep", "--data", synth_dir, "--k", "3", "--sigma", "1.0", "--out", tmp_path / "s.csv")
    assert {p.name: p.read_bytes() for p in synth_dir.iterdir() if p.is_file()} == before


@pytest.mark.parametrize("argv, code", [
    (["metrics", "--bogus", "1"], 64),
    (["frobnicate"], 64),
    ([], 64),
    (["metrics", "--a", "missing.png", "--b", "missing.png"], 2),
    (["sweep", "--data", "."], 1),
    (["sweep", "--k", "4", "--data", "SYNTH"], 1),
    (["eval", "--data", "SYNTH"], 1),
    (["degrade", "--in", "x.png"], 1),
    (["sweep", "--data", "SYNTH", "--config", "missing.json"], 2),
])
def test_exit_codes(argv, code, synth_dir, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    argv = [str(synth_dir) if a == "SYNTH" else a for a in argv]
    with pytest.raises(SystemExit) if code == 64 else _noraise() as exc:
        got = main(argv)
    if code == 64:
        assert exc.value.code == 64
        assert "usage" in capsys.readouterr().err
    else:
        assert got == code


class _noraise:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False


def test_binary_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "camlens.cli", "--bogus"], capture_output=True, text=True)
    assert out.returncode == 64 and "usage" in out.stderr
    out = subprocess.run([sys.executable, "-m", "camlens.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "camlens" in out.stdout
