"""``DFC1`` feature cache.

Layout, all little-endian::

    magic  b"DFC1"
    u16    format version (1)
    u32    n (rows)
    u32    d (columns)
    u16    class count K
    K x    (u16 byte length, UTF-8 class name)
    n x u8 labels
    n*d x f32 values, row-major by sample
"""

import struct
import sys

import numpy as np

from .errors import CapacityError, FormatError, TruncationError
from .extractor import FeatureMatrix

MAGIC = b"DFC1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIH")
_U16 = struct.Struct("<H")


def _check_capacity(n, d, names, labels):
    if n > 0xFFFFFFFF or d > 0xFFFFFFFF:
        raise CapacityError(f"n={n}, d={d} do not fit the u32 header fields")
    if n * d * 4 > sys.maxsize:
        raise CapacityError(f"payload of {n}x{d} floats exceeds addressable size")
    if len(names) > 0xFFFF:
        raise CapacityError("too many classes for a u16 class count")
    if len(names) > 256 or (labels.size and labels.max() > 255):
        raise CapacityError("labels are stored as u8; at most 256 classes")


def save_cache(features, path):
    values = np.ascontiguousarray(features.values, dtype="<f4")
    labels = np.asarray(features.labels)
    n, d = values.shape
    names = [c.encode("utf-8") for c in features.class_names]
    _check_capacity(n, d, names, labels)
    if not np.isfinite(values).all():
        raise FormatError("refusing to cache non-finite feature values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, d, len(names)))
        for raw in names:
            if len(raw) > 0xFFFF:
                raise CapacityError("class name longer than 65535 bytes")
            fh.write(_U16.pack(len(raw)))
            fh.write(raw)
        fh.write(labels.astype(np.uint8).tobytes())
        values.tofile(fh)


def _read_exact(fh, size, what):
    data = fh.read(size)
    if len(data) != size:
        raise TruncationError(f"cache truncated while reading {what}: "
                              f"wanted {size} bytes, got {len(data)}")
    return data


def load_cache(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) >= 4 and head[:4] != MAGIC:
            raise FormatError(f"bad magic {head[:4]!r}, expected {MAGIC!r}")
        if len(head) != _HEADER.size:
            raise TruncationError("cache truncated inside the header")
        _, version, n, d, k = _HEADER.unpack(head)
        if version != VERSION:
            raise FormatError(f"unsupported cache version {version}")
        if n * d * 4 > sys.maxsize:
            raise CapacityError(f"payload of {n}x{d} floats exceeds addressable size")
        names = []
        for _ in range(k):
            (length,) = _U16.unpack(_read_exact(fh, 2, "class name length"))
            try:
                names.append(_read_exact(fh, length, "class name").decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise FormatError(f"class name is not UTF-8: {exc}") from exc
        labels = np.frombuffer(_read_exact(fh, n, "labels"), dtype=np.uint8).astype(np.int64)
        values = np.frombuffer(_read_exact(fh, n * d * 4, "payload"), dtype="<f4")
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    try:
        return FeatureMatrix(values.reshape(n, d).astype(np.float32, copy=False), labels, names)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
