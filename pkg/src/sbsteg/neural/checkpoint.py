"""Binary checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic  b"SBSTEGCK"
    uint32    format version
    uint32    header length in bytes
    header    UTF-8 JSON, keys sorted: architecture, metadata, Adam scalars,
              layer table
    payload   float64 LE blocks: weight, bias for every layer in storage
              order, then (if present) Adam first moments, then second
              moments in the same order

The header is serialized deterministically, so writing the same parameters
twice, or re-writing a checkpoint that was just read, yields identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .networks import AdamState, ArchSpec, ConvLayer, NetworkParams

__all__ = ["MAGIC", "VERSION", "CheckpointError", "dumps", "loads", "read_checkpoint",
           "write_checkpoint"]

MAGIC = b"SBSTEGCK"
VERSION = 1
_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def _header(params: NetworkParams) -> dict:
    layers = [{"name": name, "shape": list(layer.weight.shape), "activation": layer.activation}
              for name, layer in params.named_layers()]
    st = params.adam
    return {
        "architecture": params.arch.to_dict(),
        "metadata": params.meta,
        "adam": {"step": st.step, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
                 "moments": bool(st.m)},
        "layers": layers,
    }


def dumps(params: NetworkParams) -> bytes:
    header = json.dumps(_header(params), sort_keys=True, separators=(",", ":")).encode()
    blocks = list(params.arrays())
    if params.adam.m:
        blocks += list(params.adam.m) + list(params.adam.v)
    payload = b"".join(np.ascontiguousarray(b, dtype=_F64).tobytes() for b in blocks)
    return MAGIC + struct.pack("<II", VERSION, len(header)) + header + payload


def loads(data: bytes) -> NetworkParams:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    arch = ArchSpec.from_dict(header["architecture"])
    expected = [(n, [co, ci, 3, 3], a) for n, ci, co, a in arch.layer_shapes()]
    table = [(l["name"], l["shape"], l["activation"]) for l in header["layers"]]
    if table != expected:
        raise CheckpointError("layer table does not match the architecture")
    offset = 16 + hlen

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + count * _F64.itemsize
        if end > len(data):
            raise CheckpointError("truncated checkpoint payload")
        arr = np.frombuffer(data, dtype=_F64, count=count, offset=offset).reshape(shape)
        offset = end
        return arr.astype(np.float64)

    shapes = []
    enc: list[list[ConvLayer]] = [[], [], []]
    dec: list[ConvLayer] = []
    for name, shape, act in table:
        w = take(shape)
        b = take((shape[0],))
        shapes += [tuple(shape), (shape[0],)]
        layer = ConvLayer(w, b, act)
        if name.startswith("dec."):
            dec.append(layer)
        else:
            enc[int(name.split(".")[1][1:]) - 1].append(layer)
    ad = header["adam"]
    adam = AdamState(ad["step"], beta1=ad["beta1"], beta2=ad["beta2"], eps=ad["eps"])
    if ad["moments"]:
        adam.m = [take(s) for s in shapes]
        adam.v = [take(s) for s in shapes]
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after payload")
    return NetworkParams(arch, enc, dec, adam, header["metadata"])


def write_checkpoint(path: str | os.PathLike, params: NetworkParams) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(params))
    return path


def read_checkpoint(path: str | os.PathLike) -> NetworkParams:
    return loads(Path(path).read_bytes())
