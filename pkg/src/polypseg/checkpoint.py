"""Versioned checkpoint archive.

A checkpoint is a zip archive holding:
  manifest.json   format version, step counter, tensor table (name, shape,
                  dtype, payload file) and non-tensor optimizer metadata
  config.yaml     the resolved run configuration
  tensors/*.bin   raw little-endian tensor payloads

Model tensors are named "model/<state_dict key>", optimizer tensors
"optim/<param index>/<slot>". Round-tripping preserves every tensor bitwise.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
import yaml

FORMAT_VERSION = 1

_DTYPES = {
    torch.float32: "<f4",
    torch.float64: "<f8",
    torch.float16: "<f2",
    torch.int64: "<i8",
    torch.int32: "<i4",
    torch.uint8: "|u1",
    torch.bool: "|b1",
}
_TORCH_DTYPES = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    config: dict
    model_state: dict
    step: int = 0
    optimizer_state: Optional[dict] = None
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)


def _tensor_bytes(t):
    t = t.detach().cpu().contiguous()
    if t.dtype not in _DTYPES:
        raise ValueError(f"unsupported tensor dtype {t.dtype}")
    arr = t.numpy()
    return arr.astype(_DTYPES[t.dtype], copy=False).tobytes(), _DTYPES[t.dtype]


def _flatten_optimizer(state):
    tensors = {}
    meta = {"param_groups": state["param_groups"], "state_keys": {}}
    for idx, slots in state["state"].items():
        slot_meta = {}
        for slot, value in slots.items():
            if isinstance(value, torch.Tensor):
                tensors[f"optim/{idx}/{slot}"] = value
                slot_meta[slot] = "tensor"
            else:
                slot_meta[slot] = value
        meta["state_keys"][str(idx)] = slot_meta
    return tensors, meta


def _rebuild_optimizer(meta, tensors):
    state = {}
    for idx_str, slots in meta["state_keys"].items():
        idx = int(idx_str)
        rebuilt = {}
        for slot, marker in slots.items():
            rebuilt[slot] = tensors[f"optim/{idx}/{slot}"] if marker == "tensor" else marker
        state[idx] = rebuilt
    return {"state": state, "param_groups": meta["param_groups"]}


def save_checkpoint(ckpt, path):
    named = {f"model/{k}": v for k, v in ckpt.model_state.items()}
    optim_meta = None
    if ckpt.optimizer_state is not None:
        optim_tensors, optim_meta = _flatten_optimizer(ckpt.optimizer_state)
        named.update(optim_tensors)

    table = []
    payloads = {}
    for i, (name, tensor) in enumerate(named.items()):
        data, dtype = _tensor_bytes(tensor)
        fname = f"tensors/{i:05d}.bin"
        table.append({"name": name, "shape": list(tensor.shape), "dtype": dtype, "file": fname})
        payloads[fname] = data

    manifest = {
        "format_version": ckpt.format_version,
        "step": ckpt.step,
        "tensors": table,
        "optimizer_meta": optim_meta,
        "extra": ckpt.extra,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))
        zf.writestr("config.yaml", yaml.safe_dump(ckpt.config, sort_keys=True))
        for fname, data in payloads.items():
            zf.writestr(fname, data)


def load_checkpoint(path) -> Checkpoint:
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest["format_version"] != FORMAT_VERSION:
            raise ValueError(
                f"checkpoint format {manifest['format_version']} unsupported "
                f"(expected {FORMAT_VERSION})"
            )
        config = yaml.safe_load(zf.read("config.yaml"))
        tensors = {}
        for entry in manifest["tensors"]:
            arr = np.frombuffer(zf.read(entry["file"]), dtype=np.dtype(entry["dtype"]))
            arr = arr.reshape(entry["shape"]).copy()
            tensors[entry["name"]] = torch.from_numpy(arr).to(_TORCH_DTYPES[entry["dtype"]])

    model_state = {
        name[len("model/"):]: t for name, t in tensors.items() if name.startswith("model/")
    }
    optimizer_state = None
    if manifest.get("optimizer_meta") is not None:
        optimizer_state = _rebuild_optimizer(manifest["optimizer_meta"], tensors)
    return Checkpoint(
        config=config,
        model_state=model_state,
        step=manifest["step"],
        optimizer_state=optimizer_state,
        format_version=manifest["format_version"],
        extra=manifest.get("extra", {}),
    )
