"""Versioned checkpoint container for a network and its state.

A checkpoint is a single .npz holding every array of the ParameterSet
under a role prefix plus one JSON metadata entry (format version,
NetworkConfig fields, key order, step counter).  Loading rebuilds the
exact arrays, so a reloaded model reproduces forward outputs
byte-for-byte.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .network import NetworkConfig, ParameterSet

FORMAT_VERSION = 1

_PREFIX = {"params": "p", "running": "r", "m": "m", "v": "v"}


def save_checkpoint(path, cfg: NetworkConfig, pset: ParameterSet) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "config": dataclasses.asdict(cfg),
        "step": pset.step,
        "keys": {
            role: list(getattr(pset, role).keys()) for role in _PREFIX
        },
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    for role, prefix in _PREFIX.items():
        for name, arr in getattr(pset, role).items():
            arrays[f"{prefix}/{name}"] = arr
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Load (NetworkConfig, ParameterSet) from a checkpoint file."""
    with np.load(path) as data:
        if "__meta__" not in data:
            raise ValueError(f"{path}: not a checkpoint (missing metadata)")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version "
                f"{meta.get('format_version')!r}, expected {FORMAT_VERSION}"
            )
        cfg_fields = dict(meta["config"])
        cfg_fields["channels_per_stage"] = tuple(cfg_fields["channels_per_stage"])
        cfg = NetworkConfig(**cfg_fields)
        state = {}
        for role, prefix in _PREFIX.items():
            state[role] = {
                name: data[f"{prefix}/{name}"] for name in meta["keys"][role]
            }
    return cfg, ParameterSet(
        state["params"], state["running"], state["m"], state["v"], step=meta["step"]
    )
