"""Binary checkpoint format.

    magic  b"CAMSR1"
    u32    format version (little-endian)
    u32    header length, then that many bytes of UTF-8 JSON hyperparameters
    f32[]  parameters in layer order, weights then bias per layer (little-endian)
"""
import json
import struct
from dataclasses import dataclass

import numpy as np

from .._atomic import write_bytes_atomic
from ..errors import CamlensIOError, CheckpointError
from .model import SrModel

MAGIC = b"CAMSR1"
VERSION = 1


@dataclass
class Checkpoint:
    model: SrModel
    scale: float
    degradation: dict
    meta: dict


def encode_checkpoint(model, scale, degradation):
    widths = [model.channels] + [w.shape[0] for w, _ in model.layers]
    header = {
        "depth": model.depth,
        "widths": widths,
        "residual": model.residual,
        "scale": float(scale),
        "degradation": degradation,
        "n_params": int(model.n_params()),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.params())
    return MAGIC + struct.pack("<II", VERSION, len(hbytes)) + hbytes + payload


def save_checkpoint(path, model, scale, degradation):
    write_bytes_atomic(path, encode_checkpoint(model, scale, degradation))


def decode_checkpoint(data):
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a camlens checkpoint (bad magic bytes)")
    off = len(MAGIC)
    if len(data) < off + 8:
        raise CheckpointError("checkpoint truncated inside the header")
    version, hlen = struct.unpack_from("<II", data, off)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    off += 8
    if len(data) < off + hlen:
        raise CheckpointError("checkpoint truncated inside the header")
    try:
        header = json.loads(data[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    off += hlen
    try:
        widths = [int(v) for v in header["widths"]]
        shapes = []
        for i in range(int(header["depth"])):
            shapes += [(widths[i + 1], widths[i], 3, 3), (widths[i + 1],)]
        for key in ("residual", "scale", "degradation", "n_params"):
            header[key]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint header is missing or malformed: {exc!r}") from None
    n = sum(int(np.prod(s)) for s in shapes)
    if n != header["n_params"]:
        raise CheckpointError("parameter count in header does not match the layer widths")
    if len(data) - off != 4 * n:
        raise CheckpointError(f"checkpoint payload has {len(data) - off} bytes, expected {4 * n}")
    flat = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(np.float32)
    arrays, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        arrays.append(flat[pos:pos + size].reshape(s).copy())
        pos += size
    model = SrModel(list(zip(arrays[0::2], arrays[1::2])), header["residual"])
    return Checkpoint(model, header["scale"], header["degradation"], header)


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CamlensIOError(f"cannot read {path}: {exc}") from exc
    return decode_checkpoint(data)
