"""Versioned binary checkpoint container.

Layout (all integers little-endian):

  magic  b"SPLC"
  u32    container version (1)
  u64    header length in bytes
  bytes  header JSON:
           {"config": {...},            # D_z, res, scale factors, ...
            "meta": {...},              # step counters, rng states, ...
            "arrays": [{"name", "dtype", "shape", "offset", "nbytes"}]}
  bytes  array payload (offsets relative to payload start)

Arrays are stored little-endian in C order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

_MAGIC = b"SPLC"
_VERSION = 1


def save_state(path: str | Path, arrays: dict[str, np.ndarray],
               config: dict, meta: dict | None = None) -> None:
    index = []
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        index.append({"name": name, "dtype": str(arr.dtype),
                      "shape": list(arr.shape), "offset": len(payload),
                      "nbytes": len(raw)})
        payload.extend(raw)
    header = json.dumps({"config": config, "meta": meta or {},
                         "arrays": index}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(bytes(payload))


def load_state(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict]:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError("not a checkpoint container")
    version, = struct.unpack("<I", data[4:8])
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    hlen, = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen])
    base = 16 + hlen
    arrays = {}
    for entry in header["arrays"]:
        dt = np.dtype(entry["dtype"]).newbyteorder("<")
        off = base + entry["offset"]
        arr = np.frombuffer(data, dtype=dt, count=int(np.prod(entry["shape"], dtype=int)),
                            offset=off)
        arrays[entry["name"]] = arr.reshape(entry["shape"]).astype(
            np.dtype(entry["dtype"]), copy=True)
    return arrays, header["config"], header["meta"]


def module_arrays(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {f"{prefix}.{k}": v.detach().cpu().numpy()
            for k, v in module.state_dict().items()}


def load_module(prefix: str, module: torch.nn.Module,
                arrays: dict[str, np.ndarray]) -> None:
    state = {}
    skip = len(prefix) + 1
    for name, arr in arrays.items():
        if name.startswith(prefix + "."):
            state[name[skip:]] = torch.from_numpy(np.ascontiguousarray(arr))
    module.load_state_dict(state)


def optimizer_arrays(prefix: str, opt: torch.optim.Optimizer
                     ) -> tuple[dict[str, np.ndarray], dict]:
    """Flatten Adam state to arrays plus a JSON-able skeleton."""
    sd = opt.state_dict()
    arrays: dict[str, np.ndarray] = {}
    skeleton = {"param_groups": sd["param_groups"], "state_keys": {}}
    for pid, st in sd["state"].items():
        keys = {}
        for k, v in st.items():
            if torch.is_tensor(v):
                arrays[f"{prefix}.{pid}.{k}"] = v.detach().cpu().numpy()
                keys[k] = "tensor"
            else:
                keys[k] = v
        skeleton["state_keys"][str(pid)] = keys
    return arrays, skeleton


def load_optimizer(prefix: str, opt: torch.optim.Optimizer,
                   arrays: dict[str, np.ndarray], skeleton: dict) -> None:
    state = {}
    for pid_str, keys in skeleton["state_keys"].items():
        pid = int(pid_str)
        st = {}
        for k, v in keys.items():
            if v == "tensor":
                st[k] = torch.from_numpy(
                    np.ascontiguousarray(arrays[f"{prefix}.{pid}.{k}"]))
            else:
                st[k] = v
        state[pid] = st
    opt.load_state_dict({"state": state,
                         "param_groups": skeleton["param_groups"]})
