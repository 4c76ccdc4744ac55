"""Single-file array container used for checkpoints and dataset shards.

Layout: 6-byte magic ``VTAC1\\n``, a little-endian uint32 manifest length, a
UTF-8 JSON manifest listing (name, shape, dtype code) per entry in order, then
the raw C-order array payloads concatenated in the same order. Readers and
writers preserve entry order, so write(read(f)) round-trips byte-exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from typing import Mapping

import numpy as np

MAGIC = b"VTAC1\n"

_DTYPES = {"f4": "<f4", "f8": "<f8", "u1": "|u1", "i4": "<i4", "i8": "<i8", "u4": "<u4"}
_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


def dumps(arrays: Mapping[str, np.ndarray]) -> bytes:
    entries = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        code = _CODES.get(arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype)
        if code is None:
            raise ValueError(f"unsupported dtype {arr.dtype} for entry {name!r}")
        arr = arr.astype(_DTYPES[code], copy=False)
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code})
        payloads.append(arr.tobytes())
    manifest = json.dumps({"entries": entries}, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(manifest)) + manifest + b"".join(payloads)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[: len(MAGIC)] != MAGIC:
        raise ValueError("not a VTAC1 container (bad magic)")
    off = len(MAGIC)
    (mlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    manifest = json.loads(blob[off : off + mlen].decode("utf-8"))
    off += mlen
    out: dict[str, np.ndarray] = {}
    for entry in manifest["entries"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(blob[off : off + n], dtype=dtype).reshape(shape)
        out[entry["name"]] = arr.copy()
        off += n
    if off != len(blob):
        raise ValueError(f"trailing bytes in container: expected {off}, file has {len(blob)}")
    return out


def save(path: str | os.PathLike, arrays: Mapping[str, np.ndarray]):
    """Atomic write: serialize to a sibling temp file, then rename over."""
    path = os.fspath(path)
    blob = dumps(arrays)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".vtac")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | os.PathLike, blob: bytes):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(os.fspath(path), "rb") as f:
        return loads(f.read())


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(os.fspath(path), "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
