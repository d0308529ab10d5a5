"""Binary checkpoint format.

Layout (little-endian)::

    b"PHVC" | version:u32 | n_tensors:u32 |
    n_tensors x ( name_len:u16 | name:utf-8 | rank:u8 | dims:u32*rank | float32 payload )

Optimiser moments are stored as ``opt.m/<name>`` and ``opt.v/<name>``,
the step counter as the scalar ``opt.step``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagicError, DuplicateTensorError, TruncatedCheckpointError, UnsupportedVersionError
from .model import ParamSet
from .training import OptState

MAGIC = b"PHVC"
VERSION = 1


def _encode(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    arr = np.asarray(arr, dtype="<f4")
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr).tobytes()


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    parts += [_encode(k, v) for k, v in tensors.items()]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_tensors(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a checkpoint (bad magic)")
    if len(buf) < 12:
        raise TruncatedCheckpointError(f"{path}: header truncated")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported format version {version}")
    pos = 12
    out: dict[str, np.ndarray] = {}

    def need(n, what, name=None):
        if pos + n > len(buf):
            raise TruncatedCheckpointError(f"{path}: truncated while reading {what}", name)

    for i in range(count):
        need(2, f"name length of tensor #{i}")
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        need(nlen + 1, f"name of tensor #{i}")
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        rank = buf[pos]
        pos += 1
        need(4 * rank, f"dims of {name!r}", name)
        dims = struct.unpack_from(f"<{rank}I", buf, pos)
        pos += 4 * rank
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        need(nbytes, f"payload of {name!r}", name)
        if name in out:
            raise DuplicateTensorError(f"{path}: duplicate tensor {name!r}")
        out[name] = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=pos).reshape(dims).astype(np.float64)
        pos += nbytes
    return out


def save_checkpoint(p: ParamSet, state: OptState | None, path) -> None:
    """Tensors are stored as float32."""
    tensors = dict(p.tensors)
    if state is not None:
        for k in p.names():
            tensors[f"opt.m/{k}"] = state.m[k]
            tensors[f"opt.v/{k}"] = state.v[k]
        tensors["opt.step"] = np.array(float(state.step))
    save_tensors(path, tensors)


def load_checkpoint(path) -> tuple[ParamSet, OptState]:
    tensors = load_tensors(path)
    params = {k: v for k, v in tensors.items() if not k.startswith("opt.")}
    p = ParamSet(params)
    state = OptState.fresh(p)
    for k in p.names():
        if f"opt.m/{k}" in tensors:
            state.m[k] = tensors[f"opt.m/{k}"]
            state.v[k] = tensors[f"opt.v/{k}"]
    if "opt.step" in tensors:
        state.step = int(tensors["opt.step"])
    return p, state
