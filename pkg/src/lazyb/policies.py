"""Scheduling policies as stateless decision procedures.

Five policy kinds share one decision vocabulary:
  Dispatch  - issue a fresh batch to the idle accelerator at the first node
  AdmitLazy - push pending requests onto the batch state table for catch-up
  Wait      - do nothing at this boundary
All mutable scheduling state (queue, batch state table, clock) lives in the
engine; policies only look at it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ValidationError
from .model_graph import ModelGraph, NodeCursor
from .slack import SlackConfig


POLICY_KINDS = ("serial", "graphb", "cellular", "lazyb", "oracle")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    max_batch: int = 64
    window_us: int = 1  # graphb/cellular only
    slack: Optional[SlackConfig] = None  # lazyb/oracle only
    preempt_overhead_us: int = 0
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValidationError(f"unknown policy kind {self.kind!r}")
        if self.max_batch < 1:
            raise ValidationError("max_batch must be >= 1")
        if self.kind in ("graphb", "cellular") and self.window_us < 0:
            raise ValidationError("window_us must be >= 0")
        if self.kind in ("lazyb", "oracle") and self.slack is None:
            raise ValidationError(f"{self.kind} policy needs a slack config")
        if self.preempt_overhead_us < 0:
            raise ValidationError("preempt_overhead_us must be >= 0")

    @property
    def display(self) -> str:
        if self.label:
            return self.label
        if self.kind in ("graphb", "cellular"):
            return f"{self.kind}({self.window_us // 1000}ms)"
        return self.kind


@dataclass(frozen=True)
class Dispatch:
    request_ids: tuple[int, ...]
    start_cursor: NodeCursor


@dataclass(frozen=True)
class AdmitLazy:
    request_ids: tuple[int, ...]


class Wait:
    def __eq__(self, other):
        return isinstance(other, Wait)

    def __repr__(self):
        return "Wait()"


WAIT = Wait()


def serial_decide(queue: Sequence, processor_idle: bool):
    """One request at a time, oldest first, whenever the processor is free."""
    if processor_idle and queue:
        return Dispatch((queue[0].id,), NodeCursor(0, 0))
    return WAIT


def graphb_decide(queue: Sequence, now: int, processor_idle: bool,
                  window_anchor: Optional[int], window_us: int, max_batch: int):
    """Dispatch the oldest <= max_batch requests when the processor is idle
    and either the batch is full or the window since the oldest arrival
    elapsed."""
    if not processor_idle or not queue:
        return WAIT
    if window_anchor is None:
        window_anchor = queue[0].arrival_us
    if len(queue) >= max_batch or now - window_anchor >= window_us:
        n = min(len(queue), max_batch)
        return Dispatch(tuple(queue[i].id for i in range(n)), NodeCursor(0, 0))
    return WAIT


def cellular_batchable(model_a: ModelGraph, a: NodeCursor,
                       model_b: ModelGraph, b: NodeCursor) -> bool:
    """Two cursors can share a kernel launch iff they name the same node, or
    both nodes carry the same (non-null) weight group - the shared-weight
    recurrent-cell case that permits cross-timestep batching."""
    if model_a.name != model_b.name:
        return False
    if a.node_id == b.node_id:
        return True
    na, nb = model_a.node(a.node_id), model_b.node(b.node_id)
    return na.weight_group is not None and na.weight_group == nb.weight_group


def lazyb_decide(bst, queue: Sequence, now: int, slack_cfg: SlackConfig,
                 exec_estimator, max_batch: int):
    """Admission at a node boundary: take the longest queue prefix that fits
    under max_batch, score the prospective merged set (everything in the
    batch state table plus the candidates), and admit only when the worst
    per-request slack is non-negative.

    With an empty table and an idle processor there is no batching window:
    dispatch whatever is queued immediately.
    """
    if not queue:
        return WAIT
    inflight = bst.request_count()
    if inflight == 0:
        n = min(len(queue), max_batch)
        return Dispatch(tuple(queue[i].id for i in range(n)), NodeCursor(0, 0))
    room = max_batch - inflight
    if room <= 0:
        return WAIT
    candidates = [queue[i] for i in range(min(len(queue), room))]
    min_slack, _predicted = exec_estimator(candidates, now)
    if min_slack >= 0:
        return AdmitLazy(tuple(r.id for r in candidates))
    return WAIT
