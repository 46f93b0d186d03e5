"""DNN model graphs and their unrolled execution order.

A model is an ordered list of node templates. Static nodes run once,
encoder/decoder nodes are time-unrolled: the encoder for a fixed number of
timesteps, the decoder for a per-request output length known only at runtime.
The unit of scheduling everywhere else in the simulator is a NodeCursor,
a (node_id, timestep) position in that unrolled sequence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

from .errors import ValidationError


class NodeKind(Enum):
    STATIC = "static"
    ENCODER = "encoder"
    DECODER = "decoder"


class GraphKind(Enum):
    STATIC_GRAPH = "static"
    DYNAMIC_GRAPH = "dynamic"


@dataclass(frozen=True)
class NodeTemplate:
    id: int
    kind: NodeKind
    base_latency_us: int
    saturation_batch: int
    weight_group: Optional[int] = None


class NodeCursor(NamedTuple):
    node_id: int
    timestep: int


# Sentinel returned by next_cursor when the unrolled sequence is exhausted.
DONE = None


@dataclass(frozen=True)
class ModelGraph:
    name: str
    nodes: tuple[NodeTemplate, ...]
    kind: GraphKind
    enc_timesteps: int = 1
    max_dec_timesteps: int = 1
    # Decoder length the single-batch latency figures were calibrated at
    # (only meaningful for dynamic graphs).
    calibration_dec_timesteps: int = 1
    # Optional per-model default for the slack predictor's decoder-length
    # assumption; when absent the coverage threshold of the length
    # distribution is used instead.
    dec_timesteps_default: Optional[int] = None

    # derived, filled by __post_init__
    enc_ids: tuple[int, ...] = field(default=(), compare=False)
    dec_ids: tuple[int, ...] = field(default=(), compare=False)
    prologue_ids: tuple[int, ...] = field(default=(), compare=False)
    epilogue_ids: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        enc = tuple(n.id for n in self.nodes if n.kind is NodeKind.ENCODER)
        dec = tuple(n.id for n in self.nodes if n.kind is NodeKind.DECODER)
        statics = [n.id for n in self.nodes if n.kind is NodeKind.STATIC]
        if enc:
            pro = tuple(i for i in statics if i < enc[0])
            epi = tuple(i for i in statics if i > dec[-1]) if dec else ()
        else:
            pro = tuple(statics)
            epi = ()
        object.__setattr__(self, "enc_ids", enc)
        object.__setattr__(self, "dec_ids", dec)
        object.__setattr__(self, "prologue_ids", pro)
        object.__setattr__(self, "epilogue_ids", epi)

    @property
    def is_static(self) -> bool:
        return self.kind is GraphKind.STATIC_GRAPH

    def node(self, node_id: int) -> NodeTemplate:
        return self.nodes[node_id]

    def first_cursor(self) -> NodeCursor:
        return NodeCursor(0, 0)

    def last_cursor(self, actual_dec: int) -> NodeCursor:
        return self.unrolled_seq(actual_dec)[-1]

    def unrolled_seq(self, actual_dec: int) -> list[NodeCursor]:
        """Full execution order for one request with the given decoder length."""
        if self.is_static:
            return [NodeCursor(n.id, 0) for n in self.nodes]
        _check_dec(self, actual_dec)
        return _build_seq(self, actual_dec)

    def order_key(self, cur: NodeCursor) -> tuple[int, int, int]:
        """Comparable position of a cursor in the unroll order (phase, t, node)."""
        node = self.nodes[cur.node_id]
        if node.kind is NodeKind.STATIC:
            phase = 0 if (not self.enc_ids or cur.node_id < self.enc_ids[0]) else 3
        elif node.kind is NodeKind.ENCODER:
            phase = 1
        else:
            phase = 2
        return (phase, cur.timestep, cur.node_id)


from functools import lru_cache


@lru_cache(maxsize=4096)
def _build_seq(model: ModelGraph, actual_dec: int) -> list[NodeCursor]:
    seq = [NodeCursor(i, 0) for i in model.prologue_ids]
    for t in range(model.enc_timesteps):
        seq.extend(NodeCursor(i, t) for i in model.enc_ids)
    for t in range(actual_dec):
        seq.extend(NodeCursor(i, t) for i in model.dec_ids)
    seq.extend(NodeCursor(i, 0) for i in model.epilogue_ids)
    return seq


def _check_dec(model: ModelGraph, actual_dec: int) -> None:
    if actual_dec < 1 or actual_dec > model.max_dec_timesteps:
        raise ValidationError(
            f"decoder length {actual_dec} outside 1..{model.max_dec_timesteps} "
            f"for model {model.name!r}"
        )


def build_model(spec: dict) -> ModelGraph:
    """Validate a model spec record (parsed catalog JSON entry) into a ModelGraph."""
    try:
        name = spec["name"]
        kind_s = spec["kind"]
        node_specs = spec["nodes"]
    except KeyError as e:
        raise ValidationError(f"model spec missing field {e}") from e
    if kind_s not in ("static", "dynamic"):
        raise ValidationError(f"unknown graph kind {kind_s!r}")
    kind = GraphKind.STATIC_GRAPH if kind_s == "static" else GraphKind.DYNAMIC_GRAPH
    if not node_specs:
        raise ValidationError(f"model {name!r} has no nodes")

    nodes = []
    for i, ns in enumerate(node_specs):
        try:
            nkind = NodeKind(ns["kind"])
        except (KeyError, ValueError):
            raise ValidationError(f"model {name!r} node {i}: bad kind {ns.get('kind')!r}")
        lat = ns.get("base_latency_us")
        sat = ns.get("saturation_batch", 16)
        if not isinstance(lat, int) or lat < 1:
            raise ValidationError(f"model {name!r} node {i}: base_latency_us must be >= 1")
        if not isinstance(sat, int) or sat < 1:
            raise ValidationError(f"model {name!r} node {i}: saturation_batch must be >= 1")
        nodes.append(
            NodeTemplate(
                id=i,
                kind=nkind,
                base_latency_us=lat,
                saturation_batch=sat,
                weight_group=ns.get("weight_group"),
            )
        )

    enc = [n.id for n in nodes if n.kind is NodeKind.ENCODER]
    dec = [n.id for n in nodes if n.kind is NodeKind.DECODER]
    if kind is GraphKind.STATIC_GRAPH:
        if enc or dec:
            raise ValidationError(f"static model {name!r} may not contain encoder/decoder nodes")
        enc_t, max_dec, cal_dec = 1, 1, 1
    else:
        if not enc or not dec:
            raise ValidationError(f"dynamic model {name!r} needs >=1 encoder and >=1 decoder node")
        if enc != list(range(enc[0], enc[0] + len(enc))):
            raise ValidationError(f"model {name!r}: encoder nodes must be contiguous")
        if dec != list(range(dec[0], dec[0] + len(dec))):
            raise ValidationError(f"model {name!r}: decoder nodes must be contiguous")
        if dec[0] < enc[-1]:
            raise ValidationError(f"model {name!r}: decoder run must follow the encoder run")
        for i in range(enc[0], dec[-1] + 1):
            if nodes[i].kind is NodeKind.STATIC:
                raise ValidationError(
                    f"model {name!r}: static node {i} inside the encoder/decoder span"
                )
        for n in nodes:
            if n.kind is not NodeKind.STATIC and n.weight_group is None:
                raise ValidationError(
                    f"model {name!r}: encoder/decoder node {n.id} needs a weight_group"
                )
        enc_t = spec.get("enc_timesteps")
        max_dec = spec.get("max_dec_timesteps")
        if not isinstance(enc_t, int) or enc_t < 1:
            raise ValidationError(f"dynamic model {name!r} needs enc_timesteps >= 1")
        if not isinstance(max_dec, int) or max_dec < 1:
            raise ValidationError(f"dynamic model {name!r} needs max_dec_timesteps >= 1")
        cal_dec = spec.get("calibration_dec_timesteps", max_dec)
        if not isinstance(cal_dec, int) or not (1 <= cal_dec <= max_dec):
            raise ValidationError(f"model {name!r}: bad calibration_dec_timesteps")

    by_group: dict[int, NodeTemplate] = {}
    for n in nodes:
        if n.weight_group is None:
            continue
        other = by_group.setdefault(n.weight_group, n)
        if (other.base_latency_us, other.saturation_batch) != (
            n.base_latency_us,
            n.saturation_batch,
        ):
            raise ValidationError(
                f"model {name!r}: weight group {n.weight_group} has mismatched "
                "latency/saturation parameters"
            )

    dec_default = spec.get("dec_timesteps")
    if dec_default is not None and (not isinstance(dec_default, int) or dec_default < 1):
        raise ValidationError(f"model {name!r}: bad dec_timesteps")

    return ModelGraph(
        name=name,
        nodes=tuple(nodes),
        kind=kind,
        enc_timesteps=enc_t,
        max_dec_timesteps=max_dec,
        calibration_dec_timesteps=cal_dec,
        dec_timesteps_default=dec_default,
    )


def unrolled_len(model: ModelGraph, actual_dec: int) -> int:
    """Number of node instances one request traverses."""
    if model.is_static:
        return len(model.nodes)
    _check_dec(model, actual_dec)
    return (
        len(model.prologue_ids)
        + len(model.epilogue_ids)
        + len(model.enc_ids) * model.enc_timesteps
        + len(model.dec_ids) * actual_dec
    )


def next_cursor(model: ModelGraph, cur: NodeCursor, actual_dec: int):
    """Successor of `cur` in the unrolled order, or DONE after the last node."""
    seq = model.unrolled_seq(actual_dec)
    try:
        i = seq.index(cur)
    except ValueError:
        raise ValidationError(f"cursor {cur} not valid for model {model.name!r}")
    return seq[i + 1] if i + 1 < len(seq) else DONE


def load_catalog(path_or_file) -> dict[str, ModelGraph]:
    """Load a model catalog JSON file: an array of model spec records."""
    if hasattr(path_or_file, "read"):
        raw = json.load(path_or_file)
    else:
        with open(path_or_file, "r", encoding="utf-8") as f:
            raw = json.load(f)
    if not isinstance(raw, list):
        raise ValidationError("catalog must be a JSON array of model specs")
    catalog = {}
    for spec in raw:
        m = build_model(spec)
        if m.name in catalog:
            raise ValidationError(f"duplicate model name {m.name!r} in catalog")
        catalog[m.name] = m
    return catalog


def shipped_catalog() -> dict[str, ModelGraph]:
    from importlib.resources import files

    return load_catalog(files("lazyb.data").joinpath("catalog.json").open("r"))
