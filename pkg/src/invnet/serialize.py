"""Binary model container with integrity checking.

Layout: 8-byte magic, u64 little-endian header length, JSON header,
float64 little-endian parameter blob, sha256 over everything before it.
All weights live in the blob so a save/load round trip is bitwise exact.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .emulator import AuxLayout, EmulatorModel
from .errors import ConfigError, DataError
from .flows import FlowSpec, FlowStack
from .nets import DenseNet, DenseNetSpec
from .rng import Rng
from .scaling import NormalizationStats
from .vae import Decoder, VariationalEncoder

MAGIC = b"INVNETM1"
FORMAT_VERSION = 1
COMPONENT_ORDER = ("emulator", "flow", "encoder", "decoder", "latent_flow")


@dataclass
class ModelBundle:
    """Everything trained for one experiment, in one file."""

    tag: str
    emulator: EmulatorModel | None = None
    flow: FlowStack | None = None
    encoder: VariationalEncoder | None = None
    decoder: Decoder | None = None
    latent_flow: FlowStack | None = None
    meta: dict = dataclasses.field(default_factory=dict)

    def component(self, name: str):
        if name not in COMPONENT_ORDER:
            raise KeyError(name)
        return getattr(self, name)


def _net_meta(net: DenseNet) -> dict:
    return {"spec": dataclasses.asdict(net.spec)}


def _net_arrays(net: DenseNet) -> list[np.ndarray]:
    out = []
    for w, b in zip(net.weights, net.biases):
        out.append(w.data)
        out.append(b.data)
    return out


def _net_load(meta: dict, arrays) -> DenseNet:
    net = DenseNet(DenseNetSpec(**meta["spec"]), Rng(0))
    for i in range(len(net.weights)):
        net.weights[i] = Tensor(next(arrays))
        net.biases[i] = Tensor(next(arrays))
    return net


def _stats_meta(stats: NormalizationStats | None):
    return None if stats is None else stats.to_dict()


def _stats_load(meta) -> NormalizationStats | None:
    return None if meta is None else NormalizationStats.from_dict(meta)


def _flow_meta(flow: FlowStack) -> dict:
    meta = {
        "data_dim": flow.data_dim,
        "spec": dataclasses.asdict(flow.spec),
        "stats": _stats_meta(flow.stats),
        "norms": None,
    }
    if flow.norms is not None:
        meta["norms"] = [
            {"mean": n.running_mean.tolist(), "var": n.running_var.tolist()}
            for n in flow.norms
        ]
    return meta


def _flow_arrays(flow: FlowStack) -> list[np.ndarray]:
    out = []
    for layer in flow.layers:
        out.extend(_net_arrays(layer.s_net))
        out.extend(_net_arrays(layer.t_net))
    return out


def _flow_load(meta: dict, arrays) -> FlowStack:
    flow = FlowStack(meta["data_dim"], FlowSpec(**meta["spec"]), Rng(0),
                     stats=_stats_load(meta["stats"]))
    for layer in flow.layers:
        for net in (layer.s_net, layer.t_net):
            for i in range(len(net.weights)):
                net.weights[i] = Tensor(next(arrays))
                net.biases[i] = Tensor(next(arrays))
    if meta["norms"] is not None:
        for norm, rec in zip(flow.norms, meta["norms"]):
            norm.running_mean = np.asarray(rec["mean"], dtype=np.float64)
            norm.running_var = np.asarray(rec["var"], dtype=np.float64)
    return flow


def _component_meta(name: str, comp) -> dict:
    if name in ("flow", "latent_flow"):
        return _flow_meta(comp)
    if name == "emulator":
        return {
            "mode": comp.mode,
            "net": _net_meta(comp.net),
            "stats_v": _stats_meta(comp.stats_v),
            "stats_out": _stats_meta(comp.stats_out),
            "stats_aux": _stats_meta(comp.stats_aux),
            "layout": None if comp.layout is None else dataclasses.asdict(comp.layout),
            "state_range": None if comp.state_range is None
            else np.asarray(comp.state_range).tolist(),
        }
    if name == "encoder":
        return {"dim_w": comp.dim_w, "net": _net_meta(comp.net)}
    if name == "decoder":
        return {
            "net": _net_meta(comp.net),
            "stats_v": _stats_meta(comp.stats_v),
            "stats_y": _stats_meta(comp.stats_y),
        }
    raise KeyError(name)


def _component_arrays(name: str, comp) -> list[np.ndarray]:
    if name in ("flow", "latent_flow"):
        return _flow_arrays(comp)
    return _net_arrays(comp.net)


def _component_load(name: str, meta: dict, arrays):
    if name in ("flow", "latent_flow"):
        return _flow_load(meta, arrays)
    if name == "emulator":
        layout = None if meta["layout"] is None else AuxLayout(**meta["layout"])
        state_range = None if meta["state_range"] is None \
            else np.asarray(meta["state_range"], dtype=np.float64)
        return EmulatorModel(
            _net_load(meta["net"], arrays), meta["mode"],
            _stats_load(meta["stats_v"]), _stats_load(meta["stats_out"]),
            stats_aux=_stats_load(meta["stats_aux"]), layout=layout,
            state_range=state_range,
        )
    if name == "encoder":
        return VariationalEncoder(_net_load(meta["net"], arrays), meta["dim_w"])
    if name == "decoder":
        return Decoder(_net_load(meta["net"], arrays),
                       _stats_load(meta["stats_v"]), _stats_load(meta["stats_y"]))
    raise KeyError(name)


def save_model(bundle: ModelBundle, path) -> Path:
    path = Path(path)
    components = {}
    blob_arrays: list[np.ndarray] = []
    shapes: list[list[int]] = []
    for name in COMPONENT_ORDER:
        comp = bundle.component(name)
        if comp is None:
            continue
        components[name] = _component_meta(name, comp)
        for a in _component_arrays(name, comp):
            arr = np.ascontiguousarray(a, dtype=np.float64)
            blob_arrays.append(arr)
            shapes.append(list(arr.shape))
    header = {
        "version": FORMAT_VERSION,
        "tag": bundle.tag,
        "meta": bundle.meta,
        "components": components,
        "array_shapes": shapes,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(a.astype("<f8", copy=False).tobytes() for a in blob_arrays)
    body = MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + blob
    digest = hashlib.sha256(body).digest()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + digest)
    return path


def load_model(path, expect_tag: str | None = None) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + 8 + 32 or raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"not a model file (bad magic): {path}")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise DataError(f"model file corrupted (checksum mismatch): {path}")
    (header_len,) = struct.unpack_from("<Q", body, len(MAGIC))
    hdr_start = len(MAGIC) + 8
    header = json.loads(body[hdr_start : hdr_start + header_len].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise DataError(
            f"model format version {header.get('version')!r} not supported "
            f"(this build reads version {FORMAT_VERSION})")
    if expect_tag is not None and header["tag"] != expect_tag:
        raise ConfigError(
            f"model was trained for experiment {header['tag']!r} but "
            f"{expect_tag!r} was requested; regenerate or point at the right file")
    blob = body[hdr_start + header_len :]
    arrays = []
    offset = 0
    for shape in header["array_shapes"]:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(
            np.frombuffer(blob, dtype="<f8", count=n, offset=offset)
            .astype(np.float64).reshape(shape))
        offset += n * 8
    if offset != len(blob):
        raise DataError(f"model blob length mismatch in {path}")
    it = iter(arrays)
    bundle = ModelBundle(tag=header["tag"], meta=header["meta"])
    for name in COMPONENT_ORDER:
        if name in header["components"]:
            setattr(bundle, name, _component_load(name, header["components"][name], it))
    return bundle
