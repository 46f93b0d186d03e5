"""Deterministic discrete-event simulation of a single-accelerator server.

One engine run takes a request trace and a policy and produces per-request
completion records. The accelerator executes exactly one node instance at a
time; its duration comes from the analytic cost model at the instantaneous
batch size. Equal-time events are ordered arrival < node-complete < window
expiry < deferred decision, then by insertion sequence, so identical inputs
always replay identically.

Two execution regimes:

* lockstep (serial / graphb / cellular): a dispatched batch executes the
  whole graph as one fused unit, decoder-padded to the longest member's
  length, and every member's result returns when the unit finishes; cellular
  additionally lets queued requests join at node boundaries when their first
  node is weight-compatible with the node about to execute (joiners run their
  own unpadded sequence and retire at their own end).

* stack (lazyb / oracle): the batch state table tracks sub-batches; pending
  requests admitted by the slack gate are pushed on top, catch up from the
  first node, and merge with the preempted entry once cursors coincide.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .bst import BatchStateTable
from .cost_model import node_latency
from .errors import InternalError, ValidationError
from .model_graph import DONE, ModelGraph, NodeCursor, NodeKind, next_cursor
from .policies import (
    AdmitLazy,
    Dispatch,
    PolicyConfig,
    Wait,
    cellular_batchable,
    graphb_decide,
    lazyb_decide,
    serial_decide,
)
from .slack import SlackConfig, single_input_exec_time
from .traffic import InferenceRequest

EV_ARRIVAL = 0
EV_NODE_DONE = 1
EV_WINDOW = 2
EV_DECIDE = 3


@dataclass
class RequestRecord:
    id: int
    model: str
    arrival_us: int
    actual_dec: int
    first_issue_us: Optional[int] = None
    complete_us: Optional[int] = None
    max_observed_batch: int = 0

    @property
    def latency_us(self) -> int:
        return self.complete_us - self.arrival_us


@dataclass
class AdmissionEvent:
    """One slack-gate evaluation at a node boundary."""
    time_us: int
    n_inflight: int
    n_candidates: int
    min_slack_us: int
    predicted_exec_us: int          # estimate used by the gate
    predicted_exec_cons_us: int     # conservative sum-of-singles estimate
    admitted: bool


@dataclass
class SimResult:
    records: list[RequestRecord]
    meta: dict
    admissions: list[AdmissionEvent] = field(default_factory=list)
    event_log: Optional[list[str]] = None


RESULT_HEADER = [
    "id", "model", "arrival_us", "first_issue_us", "complete_us",
    "latency_us", "sla_violated", "max_observed_batch",
]


def write_result(path, result: SimResult, sla_target_us: int) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in result.records:
            w.writerow([
                r.id, r.model, r.arrival_us, r.first_issue_us, r.complete_us,
                r.latency_us, str(r.latency_us > sla_target_us).lower(),
                r.max_observed_batch,
            ])


class _EngineBase:
    def __init__(self, model: ModelGraph, trace: list[InferenceRequest],
                 policy: PolicyConfig, collect_log: bool):
        self.model = model
        self.policy = policy
        self.queue: deque[InferenceRequest] = deque()
        self.records = {r.id: RequestRecord(r.id, r.model_name, r.arrival_us, r.actual_dec_timesteps)
                        for r in trace}
        self.now = 0
        self._events: list = []
        self._seq = 0
        self.log_lines: Optional[list[str]] = [] if collect_log else None
        for r in trace:
            self._push_event(r.arrival_us, EV_ARRIVAL, r)

    def _push_event(self, time_us: int, kind: int, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._events, (time_us, kind, self._seq, payload))

    def log(self, event: str, detail: str = "") -> None:
        if self.log_lines is not None:
            self.log_lines.append(f"{self.now},{event},{detail}")

    def run(self) -> None:
        while self._events:
            time_us, kind, _, payload = heapq.heappop(self._events)
            if time_us < self.now:
                raise InternalError("event time went backwards")
            self.now = time_us
            if kind == EV_ARRIVAL:
                self.log("arrival", f"id={payload.id}")
                self.on_arrival(payload)
            elif kind == EV_NODE_DONE:
                self.on_node_done()
            elif kind == EV_WINDOW:
                self.on_window()
            else:
                self.on_decide()

    # regime hooks
    def on_arrival(self, req): ...
    def on_node_done(self): ...
    def on_window(self): ...
    def on_decide(self): ...


class _Member:
    __slots__ = ("req", "seq", "pos", "record")

    def __init__(self, req: InferenceRequest, seq: list[NodeCursor], record: RequestRecord):
        self.req = req
        self.seq = seq
        self.pos = 0
        self.record = record

    @property
    def cursor(self) -> NodeCursor:
        return self.seq[self.pos]


class LockstepEngine(_EngineBase):
    """serial / graphb / cellular: one whole-graph batch at a time."""

    def __init__(self, model, trace, policy, collect_log):
        super().__init__(model, trace, policy, collect_log)
        self.inflight: list[_Member] = []
        self.running: list[_Member] = []
        self._armed_window: Optional[int] = None
        self._joins = policy.kind == "cellular"
        self._window_us = 0 if policy.kind == "serial" else policy.window_us
        self._max_batch = 1 if policy.kind == "serial" else policy.max_batch

    def on_arrival(self, req):
        self.queue.append(req)
        if not self.inflight:
            self._decide()

    def on_window(self):
        if not self.inflight:
            self._decide()

    def _decide(self):
        if self.inflight or not self.queue:
            return
        if self.policy.kind == "serial":
            decision = serial_decide(self.queue, True)
        else:
            decision = graphb_decide(self.queue, self.now, True,
                                     self.queue[0].arrival_us,
                                     self._window_us, self._max_batch)
        if isinstance(decision, Dispatch):
            self._dispatch(len(decision.request_ids))
        else:
            target = self.queue[0].arrival_us + self._window_us
            if self._armed_window != target:
                self._armed_window = target
                self._push_event(target, EV_WINDOW)

    def _dispatch(self, n):
        # the group executes as one fused unit: padded to the longest
        # member's decoder length, all results returned at the group's end
        group = [self.queue.popleft() for _ in range(n)]
        group_dec = max(r.actual_dec_timesteps for r in group)
        seq = self.model.unrolled_seq(group_dec)
        ids = []
        for req in group:
            rec = self.records[req.id]
            rec.first_issue_us = self.now
            self.inflight.append(_Member(req, seq, rec))
            ids.append(req.id)
        self.log("dispatch", f"ids={'|'.join(map(str, ids))}")
        self._start()

    def _start(self):
        if self._joins:
            self._try_joins()
        if not self.inflight:
            self._decide()
            return
        key = self.model.order_key
        lead = min(self.inflight, key=lambda m: key(m.cursor)).cursor
        if self._joins:
            participants = [m for m in self.inflight
                            if cellular_batchable(self.model, m.cursor, self.model, lead)]
        else:
            participants = [m for m in self.inflight if m.cursor == lead]
        node = self.model.node(lead.node_id)
        b = len(participants)
        dur = node_latency(node, b)
        for m in participants:
            if b > m.record.max_observed_batch:
                m.record.max_observed_batch = b
        self.running = participants
        self.log("node_start", f"node={lead.node_id},t={lead.timestep},batch={b}")
        self._push_event(self.now + dur, EV_NODE_DONE)

    def _try_joins(self):
        while self.queue and self.inflight and len(self.inflight) < self._max_batch:
            key = self.model.order_key
            lead = min(self.inflight, key=lambda m: key(m.cursor)).cursor
            first = NodeCursor(0, 0)
            if not cellular_batchable(self.model, first, self.model, lead):
                break
            req = self.queue.popleft()
            rec = self.records[req.id]
            rec.first_issue_us = self.now
            self.inflight.append(_Member(req, self.model.unrolled_seq(req.actual_dec_timesteps), rec))
            self.log("join", f"id={req.id}")

    def on_node_done(self):
        done_ids = []
        for m in self.running:
            m.pos += 1
            if m.pos == len(m.seq):
                m.record.complete_us = self.now
                done_ids.append(m.req.id)
        if done_ids:
            done = set(done_ids)
            self.inflight = [m for m in self.inflight if m.req.id not in done]
            for rid in done_ids:
                self.log("complete", f"id={rid}")
        self.running = []
        self._start()


class StackEngine(_EngineBase):
    """lazyb / oracle: batch state table with preempt / catch-up / merge."""

    def __init__(self, model, trace, policy, slack_cfg: SlackConfig, collect_log):
        super().__init__(model, trace, policy, collect_log)
        self.slack_cfg = slack_cfg
        self.bst = BatchStateTable(log=self._bst_log)
        self.dec_of = {r.id: r.actual_dec_timesteps for r in trace}
        self.req_of = {r.id: r for r in trace}
        self.last_cursor_of = {
            r.id: model.last_cursor(r.actual_dec_timesteps) for r in trace
        }
        self.admissions: list[AdmissionEvent] = []
        self._exec_cursor: Optional[NodeCursor] = None
        self._pending_overhead = 0
        self._decide_pending = False
        self._single_exec = single_input_exec_time(
            model, model.enc_timesteps, slack_cfg.dec_timesteps)
        self._estimator = (self._oracle_estimate if policy.kind == "oracle"
                           else self._conservative_estimate)
        self._last_eval = None

    def _bst_log(self, event: str, dump: str) -> None:
        self.log(event, dump)

    # ---- estimators ------------------------------------------------------

    def _max_wait(self, candidates) -> int:
        worst = 0
        for e in self.bst.entries:
            for rid in e.request_ids:
                rec = self.records[rid]
                w = rec.first_issue_us - rec.arrival_us
                if w > worst:
                    worst = w
        for r in candidates:
            w = self.now - r.arrival_us
            if w > worst:
                worst = w
        return worst

    def _conservative_sum(self, candidates) -> int:
        single = self._single_exec
        if not self.slack_cfg.credit_progress:
            return (self.bst.request_count() + len(candidates)) * single
        total = len(candidates) * single
        for e in self.bst.entries:
            for rid in e.request_ids:
                elapsed = self.now - self.records[rid].first_issue_us
                total += max(0, single - elapsed)
        return total

    def _conservative_estimate(self, candidates, now):
        predicted = self._conservative_sum(candidates)
        min_slack = self.slack_cfg.sla_target_us - (self._max_wait(candidates) + predicted)
        self._last_eval = (min_slack, predicted, self._conservative_sum(candidates))
        return min_slack, predicted

    def _oracle_estimate(self, candidates, now):
        """Exact forward replay of the prospective stack (no future arrivals):
        per-request slack from true completion times, predicted exec = the
        remaining busy time until the stack drains."""
        model = self.model
        entries = [[e.next, list(e.request_ids)] for e in self.bst.entries]
        entries.append([model.first_cursor(), [r.id for r in candidates]])
        dec_of = self.dec_of
        last_of = self.last_cursor_of
        completion: dict[int, int] = {}
        t = now
        while entries:
            cur, ids = entries[-1]
            node = model.node(cur.node_id)
            if node.kind is NodeKind.DECODER:
                ts = cur.timestep
                b = sum(1 for rid in ids if dec_of[rid] > ts)
            else:
                b = len(ids)
            t += node_latency(node, b)
            remaining = []
            for rid in ids:
                if last_of[rid] == cur:
                    completion[rid] = t
                else:
                    remaining.append(rid)
            if not remaining:
                entries.pop()
                continue
            max_dec = max(dec_of[rid] for rid in remaining)
            nxt = next_cursor(model, cur, max_dec)
            entries[-1] = [nxt, remaining]
            while len(entries) >= 2 and entries[-1][0] == entries[-2][0]:
                top = entries.pop()
                entries[-1][1].extend(top[1])
        min_slack = None
        for rid, comp in completion.items():
            s = self.slack_cfg.sla_target_us - (comp - self.req_of[rid].arrival_us)
            if min_slack is None or s < min_slack:
                min_slack = s
        predicted = t - now
        self._last_eval = (min_slack, predicted, self._conservative_sum(candidates))
        return min_slack, predicted

    # ---- event handlers --------------------------------------------------

    def on_arrival(self, req):
        self.queue.append(req)
        if self.bst.active() is None and not self._decide_pending:
            self._decide_pending = True
            self._push_event(self.now, EV_DECIDE)

    def on_decide(self):
        self._decide_pending = False
        if self.bst.active() is None and self.queue:
            self._consult_policy()
            self._start()

    def _consult_policy(self):
        self._last_eval = None
        decision = lazyb_decide(self.bst, self.queue, self.now, self.slack_cfg,
                                self._estimator, self.policy.max_batch)
        if self._last_eval is not None:
            min_slack, predicted, cons = self._last_eval
            self.admissions.append(AdmissionEvent(
                time_us=self.now,
                n_inflight=self.bst.request_count(),
                n_candidates=len(decision.request_ids) if isinstance(decision, AdmitLazy)
                else min(len(self.queue), self.policy.max_batch - self.bst.request_count()),
                min_slack_us=min_slack,
                predicted_exec_us=predicted,
                predicted_exec_cons_us=cons,
                admitted=isinstance(decision, AdmitLazy),
            ))
        if isinstance(decision, Wait):
            return
        ids = list(decision.request_ids)
        for rid in ids:
            req = self.queue.popleft()
            if req.id != rid:
                raise InternalError("policy dispatched out of queue order")
            self.records[rid].first_issue_us = self.now
        self.bst.push(ids, self.model.first_cursor(), self.model.name)
        if isinstance(decision, AdmitLazy):
            self._pending_overhead += self.policy.preempt_overhead_us
            self.log("admit", f"ids={'|'.join(map(str, ids))},slack={self._last_eval[0]}")
        else:
            self.log("dispatch", f"ids={'|'.join(map(str, ids))}")

    def _start(self):
        entry = self.bst.active()
        if entry is None:
            return
        cur = entry.next
        node = self.model.node(cur.node_id)
        if node.kind is NodeKind.DECODER:
            b = sum(1 for rid in entry.request_ids if self.dec_of[rid] > cur.timestep)
        else:
            b = len(entry.request_ids)
        if b < 1:
            raise InternalError("entry scheduled with no active members")
        dur = node_latency(node, b) + self._pending_overhead
        self._pending_overhead = 0
        for rid in entry.request_ids:
            rec = self.records[rid]
            if b > rec.max_observed_batch:
                rec.max_observed_batch = b
        self._exec_cursor = cur
        self.log("node_start", f"node={cur.node_id},t={cur.timestep},batch={b}")
        self._push_event(self.now + dur, EV_NODE_DONE)

    def on_node_done(self):
        entry = self.bst.active()
        cur = self._exec_cursor
        if entry is None or entry.next != cur:
            raise InternalError("active entry changed mid-node")
        self._exec_cursor = None
        # 1. retire members whose unrolled sequence just ended
        finished = [rid for rid in entry.request_ids if self.last_cursor_of[rid] == cur]
        for rid in finished:
            self.records[rid].complete_us = self.now
            self.log("complete", f"id={rid}")
            self.bst.retire(rid)
        # 2. advance the surviving entry; merges cascade inside the table
        if entry.request_ids:
            max_dec = max(self.dec_of[rid] for rid in entry.request_ids)
            nxt = next_cursor(self.model, cur, max_dec)
            if nxt is DONE:
                raise InternalError("entry advanced past its last cursor with members left")
            self.bst.advance_top(nxt)
        # 3. admission check over buffered arrivals (or fresh dispatch if drained)
        if self.queue:
            self._consult_policy()
        # 4. start the (possibly new) active entry
        self._start()


def run(catalog: dict[str, ModelGraph], trace: list[InferenceRequest],
        policy: PolicyConfig, slack_cfg: Optional[SlackConfig] = None,
        seed: int = 0, collect_log: bool = False, rate_qps: Optional[float] = None,
        duration_us: Optional[int] = None) -> SimResult:
    """Simulate one trace under one policy until all requests complete."""
    if not trace:
        return SimResult(records=[], meta={"policy": policy.display, "seed": seed,
                                           "rate_qps": rate_qps, "duration_us": duration_us})
    names = {r.model_name for r in trace}
    if len(names) != 1:
        raise ValidationError("trace must target a single model")
    name = trace[0].model_name
    model = catalog.get(name)
    if model is None:
        raise ValidationError(f"unknown model {name!r}")
    for r in trace:
        if not model.is_static and not (1 <= r.actual_dec_timesteps <= model.max_dec_timesteps):
            raise ValidationError(f"request {r.id}: bad decoder length")

    if policy.kind in ("lazyb", "oracle"):
        sc = slack_cfg or policy.slack
        if sc is None:
            raise ValidationError("lazyb/oracle run needs a slack config")
        eng = StackEngine(model, trace, policy, sc, collect_log)
    else:
        eng = LockstepEngine(model, trace, policy, collect_log)
    eng.run()

    records = [eng.records[r.id] for r in trace]
    for rec in records:
        if rec.complete_us is None or rec.first_issue_us is None:
            raise InternalError(f"request {rec.id} never completed")
        if not (rec.arrival_us <= rec.first_issue_us <= rec.complete_us):
            raise InternalError(f"request {rec.id}: causality violated")
    meta = {"policy": policy.display, "seed": seed, "rate_qps": rate_qps,
            "duration_us": duration_us, "model": name}
    admissions = getattr(eng, "admissions", [])
    return SimResult(records=records, meta=meta, admissions=admissions,
                     event_log=eng.log_lines)


def drain_check(engine: _EngineBase) -> bool:
    """True iff nothing queued, nothing in flight, and no future events."""
    inflight = getattr(engine, "inflight", None)
    if inflight:
        return False
    bst = getattr(engine, "bst", None)
    if bst is not None and bst.active() is not None:
        return False
    return not engine.queue and not engine._events
