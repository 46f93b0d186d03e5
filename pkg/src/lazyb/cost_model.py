"""Analytic per-node latency-vs-batch-size model.

A node at batch size b costs max(L1, ceil(L1*b/S)) microseconds, where L1 is
the single-batch latency and S the saturation batch size: flat up to S, then
linear. Simple, integer-exact, and never better than b serial executions,
which is what the conservative slack predictor relies on.
"""

from __future__ import annotations

from .errors import ValidationError
from .model_graph import ModelGraph, NodeTemplate


def node_latency(node: NodeTemplate, batch: int) -> int:
    if batch < 1:
        raise ValidationError("batch size must be >= 1")
    l1 = node.base_latency_us
    return max(l1, -(-l1 * batch // node.saturation_batch))


def batch_total_latency(model: ModelGraph, batch: int, dec_timesteps: int | None = None) -> int:
    """Latency of one pre-formed batch executing the whole unrolled graph."""
    dec = dec_timesteps if dec_timesteps is not None else model.calibration_dec_timesteps
    total = 0
    for cur in model.unrolled_seq(dec):
        total += node_latency(model.node(cur.node_id), batch)
    return total


def throughput_curve(model: ModelGraph, batch_sizes: list[int]):
    """(batch, throughput inputs/sec, total_latency_us, avg_latency_per_input_us)
    rows for pre-formed batches (no collection wait), at the model's
    calibration decoder length."""
    if not batch_sizes:
        raise ValidationError("batch size list is empty")
    rows = []
    for b in batch_sizes:
        total = batch_total_latency(model, b)
        rows.append((b, b * 1_000_000.0 / total, total, total / b))
    return rows


def calibrate(node_shares: list[float], target_total_us: int) -> list[int]:
    """Split a target total latency across nodes by share, largest-remainder
    rounded so integers sum exactly to the target."""
    if not node_shares:
        raise ValidationError("empty share list")
    if any(s <= 0 for s in node_shares):
        raise ValidationError("shares must be positive")
    if abs(sum(node_shares) - 1.0) > 1e-9:
        raise ValidationError("shares must sum to 1")
    if target_total_us < len(node_shares):
        raise ValidationError("target too small for the node count")
    raw = [s * target_total_us for s in node_shares]
    floors = [int(r) for r in raw]
    leftover = target_total_us - sum(floors)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - floors[i]), i))
    out = list(floors)
    for i in order[:leftover]:
        out[i] += 1
    return out
