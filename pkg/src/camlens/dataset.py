"""Paired LR/HR scenes and the on-disk dataset layout.

Layout::

    <dir>/<id>_lr.png
    <dir>/<id>_hr.png
    <dir>/manifest.json   {"scale": 2.9, "splits": {"train": [...], "val": [...], "test": [...]}}
"""
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._atomic import write_text_atomic
from .errors import DatasetError
from .image import as_image, load_image, save_image

SCALE_TOLERANCE = 0.05
_NAME = re.compile(r"^(?P<id>.+)_(?P<kind>lr|hr)\.png$")


@dataclass(frozen=True)
class PairedScene:
    id: str
    lr: np.ndarray
    hr: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "lr", as_image(self.lr))
        object.__setattr__(self, "hr", as_image(self.hr))
        if not self.scale > 1:
            raise DatasetError(f"scene {self.id}: scale must exceed 1, got {self.scale}")
        lh, lw = self.lr.shape[:2]
        hh, hw = self.hr.shape[:2]
        if abs(hw - round(self.scale * lw)) > 1 or abs(hh - round(self.scale * lh)) > 1:
            raise DatasetError(
                f"scene {self.id}: HR {hw}x{hh} is not {self.scale} x LR {lw}x{lh}")
        if self.lr.shape[2] != self.hr.shape[2]:
            raise DatasetError(f"scene {self.id}: LR and HR channel counts differ")


@dataclass(frozen=True)
class Dataset:
    pairs: tuple
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs, key=lambda p: p.id)))
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate scene ids")
        splits = self.splits or default_split(ids)
        splits = {k: list(splits.get(k, [])) for k in ("train", "val", "test")}
        _check_split(ids, splits)
        object.__setattr__(self, "splits", splits)

    def __len__(self):
        return len(self.pairs)

    @property
    def ids(self):
        return [p.id for p in self.pairs]

    def subset(self, split):
        """Scenes of one split ("train", "val", "test") or ``"all"``."""
        if split == "all":
            return list(self.pairs)
        wanted = set(self.splits[split])
        return [p for p in self.pairs if p.id in wanted]


def default_split(ids):
    """Sorted ids; the last block goes to test, the one before to val (5 each at most)."""
    ids = sorted(ids)
    n = len(ids)
    n_test = min(5, n // 4)
    n_val = min(5, n // 4)
    test = ids[n - n_test:]
    val = ids[n - n_test - n_val:n - n_test]
    train = ids[:n - n_test - n_val]
    return {"train": train, "val": val, "test": test}


def _check_split(ids, splits):
    seen = {}
    for name, members in splits.items():
        for i in members:
            if i in seen:
                raise DatasetError(f"scene {i} is in both {seen[i]} and {name}")
            seen[i] = name
    if set(seen) != set(ids):
        missing = sorted(set(ids) - set(seen))
        extra = sorted(set(seen) - set(ids))
        raise DatasetError(f"split does not cover the dataset (missing {missing}, unknown {extra})")


def load_dataset(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"{directory} is not a directory")
    files = {}
    for p in sorted(directory.iterdir()):
        m = _NAME.match(p.name)
        if m:
            files.setdefault(m["id"], {})[m["kind"]] = p
    manifest = {}
    mpath = directory / "manifest.json"
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as e:
            raise DatasetError(f"{mpath}: malformed manifest ({e})") from None
    pairs = []
    for sid in sorted(files):
        kinds = files[sid]
        if set(kinds) != {"lr", "hr"}:
            missing = "hr" if "lr" in kinds else "lr"
            raise DatasetError(f"orphan scene {sid!r}: no {sid}_{missing}.png")
        lr, hr = load_image(kinds["lr"]), load_image(kinds["hr"])
        ratio = 0.5 * (hr.shape[1] / lr.shape[1] + hr.shape[0] / lr.shape[0])
        scale = manifest.get("scale", ratio)
        if abs(ratio - scale) > SCALE_TOLERANCE:
            raise DatasetError(
                f"scene {sid!r}: dimension ratio {ratio:.3f} disagrees with manifest scale {scale}")
        pairs.append(PairedScene(sid, lr, hr, float(scale)))
    return Dataset(tuple(pairs), manifest.get("splits") or {})


def save_dataset(dataset, directory, scale=None, bit_depth=16, extra=None):
    """Write the paired layout plus manifest. Manifest keys are sorted for byte stability."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for p in dataset.pairs:
        save_image(p.lr, directory / f"{p.id}_lr.png", bit_depth)
        save_image(p.hr, directory / f"{p.id}_hr.png", bit_depth)
    if scale is None:
        scale = dataset.pairs[0].scale if dataset.pairs else 1.0
    manifest = {"scale": scale, "splits": dataset.splits}
    if extra:
        manifest.update(extra)
    write_text_atomic(directory / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
