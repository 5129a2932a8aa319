"""Degradation matching: sweep Gaussian (k, sigma) against realistic LR observations."""
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._atomic import write_text_atomic
from .errors import ValidationError
from .metrics import evaluate, format_db, interpolated_baseline, psnr
from .resample import GaussianParams, check_scale, degrade_bicubic, degrade_gaussian, resize_bicubic

CSV_HEADER = ["k", "sigma", "mean_psnr_db", "n_scenes"]


@dataclass(frozen=True)
class SweepGrid:
    k_values: tuple
    sigma_values: tuple

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        sig = tuple(float(s) for s in self.sigma_values)
        if not ks or not sig:
            raise ValidationError("sweep grid needs at least one k and one sigma")
        if any(b <= a for a, b in zip(ks, ks[1:])) or any(b <= a for a, b in zip(sig, sig[1:])):
            raise ValidationError("grid values must be strictly increasing")
        for k in ks:
            GaussianParams(k, sig[0])  # validates k
        if sig[0] <= 0:
            raise ValidationError("sigma values must be positive")
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "sigma_values", sig)

    def cells(self):
        return [(k, s) for k in self.k_values for s in self.sigma_values]


def sigma_range(start, stop, step):
    """Inclusive arithmetic range, rounded to kill float drift (0.5:4.0:0.05 has 71 values)."""
    if step <= 0 or stop < start:
        raise ValidationError(f"bad range {start}:{stop}:{step}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


DEFAULT_GRID = SweepGrid((3, 5, 7, 9), sigma_range(0.5, 4.0, 0.05))


@dataclass(frozen=True)
class SweepRow:
    k: int
    sigma: float
    mean_psnr: float
    n_scenes: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    best: tuple  # every row attaining the maximum mean PSNR

    def per_k_best(self):
        """Best sigma for each kernel size: the peak of each PSNR-vs-sigma curve."""
        out = {}
        for r in self.rows:
            if r.k not in out or r.mean_psnr > out[r.k].mean_psnr:
                out[r.k] = r
        return [out[k] for k in sorted(out)]

    def local_optima(self):
        """Rows that are no worse than their 4-neighbours in the (k, sigma) grid."""
        table = {(r.k, r.sigma): r for r in self.rows}
        ks = sorted({r.k for r in self.rows})
        ss = sorted({r.sigma for r in self.rows})
        found = []
        for r in self.rows:
            i, j = ks.index(r.k), ss.index(r.sigma)
            nbrs = [(ks[a], ss[b]) for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))
                    if 0 <= a < len(ks) and 0 <= b < len(ss)]
            if all(r.mean_psnr >= table[n].mean_psnr for n in nbrs):
                found.append(r)
        return found


def _realistic_up(scene):
    return interpolated_baseline(scene)


def sweep_gaussian(scenes, grid=DEFAULT_GRID, scale=2.9, blur_first=True, phase=0, threads=1):
    """Mean PSNR between interp(degrade_gaussian(hr)) and interp(lr) for every grid cell."""
    scenes = list(scenes)
    if not scenes:
        raise ValidationError("sweep needs at least one scene")
    scale = check_scale(scale)
    targets = [_realistic_up(s) for s in scenes]

    def score(cell):
        params = GaussianParams(*cell)
        vals = []
        for scene, target in zip(scenes, targets):
            h, w = scene.hr.shape[:2]
            lr_g = degrade_gaussian(scene.hr, params, scale, blur_first, phase)
            vals.append(psnr(resize_bicubic(lr_g, w, h), target))
        return SweepRow(params.k, params.sigma, float(np.mean(vals)), len(vals))

    cells = grid.cells()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = tuple(pool.map(score, cells))  # map keeps grid order
    else:
        rows = tuple(score(c) for c in cells)
    top = max(r.mean_psnr for r in rows)
    return SweepResult(rows, tuple(r for r in rows if r.mean_psnr == top))


def _fmt(v):
    return "inf" if math.isinf(v) else f"{v:.6f}"


def sweep_csv_text(result):
    assert result.best, "a sweep result always has at least one best cell"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in result.rows:
        writer.writerow([r.k, _fmt(r.sigma), _fmt(r.mean_psnr), r.n_scenes])
    return buf.getvalue()


def emit_sweep_csv(result, path):
    write_text_atomic(path, sweep_csv_text(result))


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValidationError(f"unexpected sweep CSV header {reader.fieldnames}")
        rows = tuple(SweepRow(int(r["k"]), float(r["sigma"]), float(r["mean_psnr_db"]), int(r["n_scenes"]))
                     for r in reader)
    top = max(r.mean_psnr for r in rows)
    return SweepResult(rows, tuple(r for r in rows if r.mean_psnr == top))


def compare_degradations(scenes, scale, gauss, blur_first=True, phase=0):
    """PSNR/SSIM against HR of the interpolated bicubic, Gaussian and realistic LR of each scene."""
    scenes = list(scenes)
    if not scenes:
        raise ValidationError("comparison needs at least one scene")
    scale = check_scale(scale)
    rows = []
    for s in scenes:
        h, w = s.hr.shape[:2]
        cands = {
            "bicubic": resize_bicubic(degrade_bicubic(s.hr, scale), w, h),
            "gaussian": resize_bicubic(degrade_gaussian(s.hr, gauss, scale, blur_first, phase), w, h),
            "realistic": _realistic_up(s),
        }
        rows.append({"id": s.id, **{name: evaluate(c, s.hr) for name, c in cands.items()}})
    names = ("bicubic", "gaussian", "realistic")
    mean = {n: {"psnr_db": format_db(float(np.mean([r[n].psnr for r in rows]))),
                "ssim": float(np.mean([r[n].ssim for r in rows]))} for n in names}
    return {
        "scale": scale,
        "gaussian": gauss.tag(),
        "scenes": [{"id": r["id"], **{n: r[n].to_json() for n in names}} for r in rows],
        "mean": mean,
    }
