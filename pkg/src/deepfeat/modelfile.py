"""``DFLM`` model files and JSON export.

Layout, little-endian::

    magic  b"DFLM"
    u16    version (1)
    u8     mode (0 binary, 1 multinomial, 2 one_vs_rest)
    u32    K_eff (weight rows)
    u32    d
    f64    K_eff*d weights (row-major), then K_eff biases
    u8     standardization flag; if 1: d f64 means, then d f64 stds
    u16    class count, then per class (u16 byte length, UTF-8 name)
"""

import json
import struct

import numpy as np

from .errors import FormatError, TruncationError
from .linear_head import MODES, LinearModel

MAGIC = b"DFLM"
VERSION = 1
_HEADER = struct.Struct("<4sHBII")


def save_model(model, path):
    W = np.ascontiguousarray(model.weights, dtype="<f8")
    k_eff, d = W.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, MODES.index(model.mode), k_eff, d))
        fh.write(W.tobytes())
        fh.write(np.asarray(model.bias, dtype="<f8").tobytes())
        if model.mean is None:
            fh.write(b"\x00")
        else:
            fh.write(b"\x01")
            fh.write(np.asarray(model.mean, dtype="<f8").tobytes())
            fh.write(np.asarray(model.std, dtype="<f8").tobytes())
        fh.write(struct.pack("<H", len(model.class_names)))
        for name in model.class_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)) + raw)


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    pos = 0

    def take(size):
        nonlocal pos
        if pos + size > len(data):
            raise TruncationError("model file truncated")
        chunk = data[pos:pos + size]
        pos += size
        return chunk

    _, version, mode, k_eff, d = _HEADER.unpack(take(_HEADER.size))
    if version != VERSION:
        raise FormatError(f"unsupported model version {version}")
    if mode >= len(MODES):
        raise FormatError(f"unknown mode code {mode}")
    W = np.frombuffer(take(8 * k_eff * d), dtype="<f8").reshape(k_eff, d).astype(np.float64)
    b = np.frombuffer(take(8 * k_eff), dtype="<f8").astype(np.float64)
    mean = std = None
    if take(1) == b"\x01":
        mean = np.frombuffer(take(8 * d), dtype="<f8").astype(np.float64)
        std = np.frombuffer(take(8 * d), dtype="<f8").astype(np.float64)
    (k,) = struct.unpack("<H", take(2))
    names = []
    for _ in range(k):
        (length,) = struct.unpack("<H", take(2))
        names.append(take(length).decode("utf-8"))
    if pos != len(data):
        raise FormatError("trailing bytes after model")
    return LinearModel(W, b, MODES[mode], tuple(names), mean, std)


def model_to_dict(model):
    out = {
        "mode": model.mode,
        "classes": list(model.class_names),
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
    }
    if model.mean is not None:
        out["standardization"] = {"mean": model.mean.tolist(), "std": model.std.tolist()}
    return out


def save_model_json(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
