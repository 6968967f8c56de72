"""Deterministic binary checkpoint container.

Layout: 8-byte magic, u32 format version, u64 header length, UTF-8 JSON
header, then raw little-endian array blobs. The header carries the encoder
config, an array manifest (name, dtype, shape, offset), optional optimizer
state, and free-form metadata. Arrays are laid out in sorted-name order so
the same state always produces byte-identical files.
"""
from __future__ import annotations

import json

import numpy as np

from . import autograd as ag
from .errors import CheckpointError

MAGIC = b"SENTCKPT"
VERSION = 1

_DTYPES = {"float64": "<f8", "float32": "<f4", "int64": "<i8"}


def _manifest(arrays: dict) -> tuple[list, int]:
    entries = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        if a.dtype.name not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {a.dtype} for {name!r}")
        entries.append({"name": name, "dtype": a.dtype.name,
                        "shape": list(a.shape), "offset": offset})
        offset += a.nbytes
    return entries, offset


def save_checkpoint(path, config: dict, params: dict, opt_state: dict | None = None,
                    extra: dict | None = None):
    """params: name -> Tensor or ndarray. Optimizer moments are stored flat."""
    arrays = {k: (v.data if isinstance(v, ag.Tensor) else np.asarray(v))
              for k, v in params.items()}
    opt_header = None
    if opt_state is not None:
        opt_header = {"t": int(opt_state["t"])}
        for k, a in opt_state["m"].items():
            arrays[f"__opt_m__{k}"] = a
        for k, a in opt_state["v"].items():
            arrays[f"__opt_v__{k}"] = a

    manifest, blob_len = _manifest(arrays)
    header = {
        "format_version": VERSION,
        "config": config,
        "arrays": manifest,
        "opt": opt_header,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint32(VERSION).tobytes())
        f.write(np.uint64(len(header_bytes)).tobytes())
        f.write(header_bytes)
        for e in manifest:
            a = np.ascontiguousarray(arrays[e["name"]]).astype(_DTYPES[e["dtype"]], copy=False)
            f.write(a.tobytes())
        written = f.tell()
    expected = len(MAGIC) + 4 + 8 + len(header_bytes) + blob_len
    if written != expected:
        raise CheckpointError(f"short write: {written} != {expected} bytes")


def load_checkpoint(path):
    """Returns (config dict, name -> ndarray, opt_state or None, extra dict)."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < len(MAGIC) + 12 or raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    pos = len(MAGIC)
    version = int(np.frombuffer(raw, "<u4", count=1, offset=pos)[0])
    if version != VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {VERSION}")
    pos += 4
    header_len = int(np.frombuffer(raw, "<u8", count=1, offset=pos)[0])
    pos += 8
    try:
        header = json.loads(raw[pos: pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    blob_start = pos + header_len

    arrays = {}
    for e in header["arrays"]:
        dt = np.dtype(_DTYPES[e["dtype"]])
        count = int(np.prod(e["shape"], dtype=np.int64)) if e["shape"] else 1
        start = blob_start + e["offset"]
        end = start + count * dt.itemsize
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated blob for {e['name']!r}")
        arrays[e["name"]] = np.frombuffer(
            raw, dt, count=count, offset=start).reshape(e["shape"]).copy()

    opt_state = None
    if header.get("opt") is not None:
        m = {k[len("__opt_m__"):]: v for k, v in arrays.items() if k.startswith("__opt_m__")}
        v = {k[len("__opt_v__"):]: a for k, a in arrays.items() if k.startswith("__opt_v__")}
        opt_state = {"t": int(header["opt"]["t"]), "m": m, "v": v}
        arrays = {k: a for k, a in arrays.items() if not k.startswith("__opt_")}
    return header["config"], arrays, opt_state, header.get("extra", {})


def params_from_arrays(arrays: dict) -> dict:
    return {k: ag.parameter(a) for k, a in arrays.items()}
