"""Versioned binary checkpoints.

Layout: a magic line, a line holding the JSON header length, the JSON header
(sorted keys), then raw little-endian array blocks at the offsets the header
lists. Wiring is stored explicitly so a load never depends on re-deriving it
from a seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .init import InitKind, InitScheme
from .network import EncoderConfig, Layer, Network, NetworkConfig, Parametrization
from .train import AdamState

MAGIC = b"dlgn-checkpoint\n"
FORMAT_VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8", "u1": "|u1"}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    net: Network
    state: AdamState
    step: int
    config_text: str = ""
    seed: int = 0


def _net_header(net: Network) -> dict:
    c = net.config
    init = c.init
    return {
        "layer_width": c.layer_width,
        "base_layers": c.base_layers,
        "depth_scale": c.depth_scale,
        "class_count": c.class_count,
        "tau": c.tau,
        "parametrization": c.parametrization.value,
        "estimator": c.estimator.value,
        "residual_fraction": list(c.residual_fraction) if c.residual_fraction else None,
        "final_layer_width_multiplier": c.final_layer_width_multiplier,
        "init": {"kind": init.kind.value, "sigma": init.sigma, "mu": init.mu, "z": init.z,
                 "target_gates": list(init.target_gates)},
        "input_dim": net.encoder.input_dim,
        "thresholds": net.encoder.thresholds,
    }


def _blocks(ck: Checkpoint):
    for l, layer in enumerate(ck.net.layers):
        yield f"layer{l}.ia", "i8", layer.ia
        yield f"layer{l}.ib", "i8", layer.ib
        yield f"layer{l}.fixed", "u1", layer.fixed
        yield f"layer{l}.logits", "f8", layer.logits
        yield f"layer{l}.adam_m", "f8", ck.state.m[l]
        yield f"layer{l}.adam_v", "f8", ck.state.v[l]


def to_bytes(ck: Checkpoint) -> bytes:
    entries, payload, offset = [], [], 0
    for name, code, arr in _blocks(ck):
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(np.shape(arr)),
                        "offset": offset, "nbytes": len(raw)})
        payload.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "step": ck.step,
        "adam_t": ck.state.t,
        "seed": ck.seed,
        "config": ck.config_text,
        "network": _net_header(ck.net),
        "blocks": entries,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + f"{len(head)}\n".encode() + head + b"\n" + b"".join(payload)


def save(path, ck: Checkpoint) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(to_bytes(ck))
    os.replace(tmp, path)


def read_header(data: bytes) -> tuple[dict, int]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    rest = data[len(MAGIC):]
    nl = rest.find(b"\n")
    try:
        n = int(rest[:nl])
        header = json.loads(rest[nl + 1:nl + 1 + n])
    except ValueError as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('format_version')}")
    return header, len(MAGIC) + nl + 1 + n + 1


def from_bytes(data: bytes, expect: Parametrization | str | None = None) -> Checkpoint:
    header, base = read_header(data)
    nh = header["network"]
    if expect is not None and Parametrization(expect).value != nh["parametrization"]:
        raise CheckpointError(f"checkpoint holds a {nh['parametrization']} network, "
                              f"expected {Parametrization(expect).value}")
    arrays = {}
    for b in header["blocks"]:
        start = base + b["offset"]
        if start + b["nbytes"] > len(data):
            raise CheckpointError(f"block {b['name']} is truncated")
        arr = np.frombuffer(data, dtype=_DTYPES[b["dtype"]], count=int(np.prod(b["shape"])),
                            offset=start).reshape(b["shape"])
        arrays[b["name"]] = arr.astype(np.bool_) if b["dtype"] == "u1" else arr.copy()
    ini = nh["init"]
    cfg = NetworkConfig(
        layer_width=nh["layer_width"], base_layers=nh["base_layers"],
        depth_scale=nh["depth_scale"], class_count=nh["class_count"], tau=nh["tau"],
        parametrization=nh["parametrization"], estimator=nh["estimator"],
        init=InitScheme(InitKind(ini["kind"]), sigma=ini["sigma"], mu=ini["mu"], z=ini["z"],
                        target_gates=tuple(ini["target_gates"])),
        residual_fraction=tuple(nh["residual_fraction"]) if nh["residual_fraction"] else None,
        final_layer_width_multiplier=nh["final_layer_width_multiplier"],
    )
    layers, m, v = [], [], []
    try:
        for l in range(cfg.n_layers):
            layers.append(Layer(arrays[f"layer{l}.ia"], arrays[f"layer{l}.ib"],
                                arrays[f"layer{l}.logits"], arrays[f"layer{l}.fixed"]))
            m.append(arrays[f"layer{l}.adam_m"])
            v.append(arrays[f"layer{l}.adam_v"])
    except KeyError as exc:
        raise CheckpointError(f"missing block {exc}") from None
    net = Network(cfg, EncoderConfig(nh["input_dim"], nh["thresholds"]), layers)
    return Checkpoint(net, AdamState(m, v, header["adam_t"]), header["step"],
                      header["config"], header["seed"])


def load(path, expect: Parametrization | str | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read(), expect)


def block_sizes(data: bytes) -> dict[str, int]:
    header, _ = read_header(data)
    return {b["name"]: b["nbytes"] for b in header["blocks"]}
