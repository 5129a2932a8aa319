import filecmp
import json

import numpy as np
import pytest

from camlens.analysis import (DEFAULT_GRID, SweepGrid, compare_degradations, emit_sweep_csv, read_sweep_csv,
                              sigma_range, sweep_csv_text, sweep_gaussian)
from camlens.dataset import PairedScene, load_dataset
from camlens.errors import ValidationError
from camlens.resample import GaussianParams, degrade_bicubic
from camlens.synth import SynthSpec, synthesize, write_synth


def test_default_grid_size():
    assert len(sigma_range(0.5, 4.0, 0.05)) == 71
    assert sigma_range(0.5, 4.0, 0.05)[-1] == 4.0
    assert len(DEFAULT_GRID.cells()) == 284


@pytest.mark.parametrize("ks, ss", [((), (1.0,)), ((3,), ()), ((5, 3), (1.0,)), ((3,), (1.0, 1.0)), ((4,), (1.0,)),
                                    ((3,), (0.0, 1.0))])
def test_grid_validation(ks, ss):
    with pytest.raises(ValidationError):
        SweepGrid(ks, ss)


def test_single_cell_grid(sweep_data):
    res = sweep_gaussian(sweep_data.pairs[:1], SweepGrid((3,), (0.8,)))
    assert len(res.rows) == 1 and res.best == res.rows


@pytest.mark.invariant
def test_sweep_recovers_hidden_params(sweep_data):
    grid = SweepGrid((3, 5, 7), sigma_range(0.8, 1.6, 0.1))
    res = sweep_gaussian(sweep_data.pairs, grid)
    assert [(b.k, b.sigma) for b in res.best] == [(5, 1.2)]
    top = res.best[0].mean_psnr
    assert all(r.mean_psnr < top for r in res.rows if (r.k, r.sigma) != (5, 1.2))
    assert [r.n_scenes for r in res.rows] == [4] * len(res.rows)
    assert [(r.k, r.sigma) for r in res.rows] == grid.cells()


@pytest.mark.invariant
def test_sweep_deterministic_and_thread_independent(sweep_data):
    grid = SweepGrid((3, 5), (1.0, 1.2, 1.4))
    a = sweep_csv_text(sweep_gaussian(sweep_data.pairs, grid))
    b = sweep_csv_text(sweep_gaussian(sweep_data.pairs, grid, threads=3))
    assert a == b == sweep_csv_text(sweep_gaussian(sweep_data.pairs, grid))


@pytest.mark.invariant
def test_refined_grid_scores_at_least_coarse(sweep_data):
    coarse = sweep_gaussian(sweep_data.pairs, SweepGrid((3, 7), (0.8, 1.6)))
    fine = sweep_gaussian(sweep_data.pairs, SweepGrid((3, 5, 7), (0.8, 1.0, 1.2, 1.4, 1.6)))
    assert fine.best[0].mean_psnr >= coarse.best[0].mean_psnr


def test_local_optima_and_per_k(sweep_data):
    res = sweep_gaussian(sweep_data.pairs, SweepGrid((3, 5, 7), (1.0, 1.2, 1.4)))
    assert (5, 1.2) in [(r.k, r.sigma) for r in res.local_optima()]
    assert [r.k for r in res.per_k_best()] == [3, 5, 7]


def test_sweep_empty():
    with pytest.raises(ValidationError):
        sweep_gaussian([], SweepGrid((3,), (1.0,)))


def test_csv_layout_and_roundtrip(sweep_data, tmp_path):
    res = sweep_gaussian(sweep_data.pairs, SweepGrid((3, 5), (1.0, 1.25)))
    emit_sweep_csv(res, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "k,sigma,mean_psnr_db,n_scenes" and len(lines) == 5
    assert lines[2].startswith("3,1.250000,")
    back = read_sweep_csv(tmp_path / "s.csv")
    for r, q in zip(res.rows, back.rows):
        assert (r.k, r.n_scenes) == (q.k, q.n_scenes)
        assert abs(r.sigma - q.sigma) <= 1e-6 and abs(r.mean_psnr - q.mean_psnr) <= 1e-6


def test_csv_requires_best():
    from camlens.analysis import SweepResult
    with pytest.raises(AssertionError):
        sweep_csv_text(SweepResult((), ()))


def _bicubic_scene(rng, sid="a"):
    hr = rng.uniform(size=(58, 87, 3))
    return PairedScene(sid, degrade_bicubic(hr, 2.9), hr, 2.9)


def test_compare_bicubic_row_equals_realistic(rng):
    rep = compare_degradations([_bicubic_scene(rng)], 2.9, GaussianParams(5, 2.65))
    s = rep["scenes"][0]
    assert abs(s["bicubic"]["psnr_db"] - s["realistic"]["psnr_db"]) < 1e-6
    assert rep["mean"]["gaussian"]["psnr_db"] == s["gaussian"]["psnr_db"]
    assert json.loads(json.dumps(rep)) == rep


def test_compare_mean_over_scenes(rng):
    scenes = [_bicubic_scene(rng, "a"), _bicubic_scene(rng, "b")]
    rep = compare_degradations(scenes, 2.9, GaussianParams(7, 1.55))
    vals = [s["gaussian"]["psnr_db"] for s in rep["scenes"]]
    assert rep["mean"]["gaussian"]["psnr_db"] == pytest.approx(np.mean(vals))
    with pytest.raises(ValidationError):
        compare_degradations([], 2.9, GaussianParams(7, 1.55))


# ---- synthetic data ----

def test_identity_chain_is_bicubic_degradation():
    ds, _, _ = synthesize(SynthSpec(n_scenes=3, seed=2))
    for p in ds.pairs:
        assert np.abs(p.lr - degrade_bicubic(p.hr, 2.9)).max() <= 0.5 / 65535 + 1e-12


@pytest.mark.invariant
def test_synth_byte_identical(tmp_path):
    spec = SynthSpec(n_scenes=2, gauss=(5, 1.2), bias=0.01, noise=0.01, checker_grid=(2, 3), seed=9)
    write_synth(spec, tmp_path / "a")
    write_synth(spec, tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for name in cmp.common_files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "checker" / "lr.png").read_bytes() == (tmp_path / "b" / "checker" / "lr.png").read_bytes()
    truth = json.loads((tmp_path / "a" / "truth.json").read_text())
    assert truth["spec"]["gauss"] == [5, 1.2]
    assert load_dataset(tmp_path / "a").ids == ["000", "001"]


def test_synth_seed_changes_content():
    a, _, _ = synthesize(SynthSpec(n_scenes=1, seed=1))
    b, _, _ = synthesize(SynthSpec(n_scenes=1, seed=2))
    assert not np.array_equal(a.pairs[0].hr, b.pairs[0].hr)
