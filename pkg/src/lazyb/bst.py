"""Batch state table: a stack of sub-batch entries.

Each entry is a group of requests sharing execution progress, tagged with the
node cursor the group will execute next. The top of the stack is the active
batch. When the top entry advances to the same cursor as the entry below it,
the two merge; merging cascades while cursors keep matching. All mutation
happens at node boundaries, driven by the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InternalError, ValidationError
from .model_graph import NodeCursor


@dataclass
class SubBatchEntry:
    request_ids: list[int]
    next: NodeCursor
    model_name: str


class BatchStateTable:
    def __init__(self, log: Optional[Callable[[str, str], None]] = None):
        self._entries: list[SubBatchEntry] = []
        self._by_request: dict[int, SubBatchEntry] = {}
        self._log = log
        # incremented by a constant amount per active() call; lets tests
        # audit that top-of-stack access does no per-depth work
        self.active_probe_ops = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[SubBatchEntry]:
        return self._entries

    def request_count(self) -> int:
        return len(self._by_request)

    def request_ids(self) -> set[int]:
        return set(self._by_request)

    def __contains__(self, request_id: int) -> bool:
        return request_id in self._by_request

    def dump(self) -> str:
        return ";".join(
            f"[{','.join(map(str, e.request_ids))}]@({e.next.node_id},{e.next.timestep})"
            for e in self._entries
        )

    def _emit(self, event: str) -> None:
        if self._log is not None:
            self._log(event, self.dump())

    def push(self, request_ids: list[int], start_cursor: NodeCursor, model_name: str) -> None:
        if not request_ids:
            raise ValidationError("push needs at least one request id")
        for rid in request_ids:
            if rid in self._by_request:
                raise ValidationError(f"request {rid} already in the batch state table")
        if self._entries:
            top = self._entries[-1]
            if top.next == start_cursor and top.model_name == model_name:
                raise InternalError("push would duplicate the top entry's cursor")
        entry = SubBatchEntry(list(request_ids), start_cursor, model_name)
        self._entries.append(entry)
        for rid in request_ids:
            self._by_request[rid] = entry
        self._emit("push")

    def advance_top(self, resume_cursor: NodeCursor) -> Optional[SubBatchEntry]:
        """Move the top entry to its resume cursor, then merge downward while
        the two topmost cursors (and models) match. Returns the merged entry,
        or None when no merge happened."""
        if not self._entries:
            raise ValidationError("advance_top on an empty table")
        self._entries[-1].next = resume_cursor
        self._emit("advance")
        merged = None
        while len(self._entries) >= 2:
            top = self._entries[-1]
            below = self._entries[-2]
            if top.next != below.next or top.model_name != below.model_name:
                break
            below.request_ids.extend(top.request_ids)
            for rid in top.request_ids:
                self._by_request[rid] = below
            self._entries.pop()
            merged = below
            self._emit("merge")
        return merged

    def retire(self, request_id: int) -> None:
        entry = self._by_request.pop(request_id, None)
        if entry is None:
            raise ValidationError(f"unknown request {request_id}")
        entry.request_ids.remove(request_id)
        if not entry.request_ids:
            self._entries.remove(entry)
        self._emit("retire")

    def active(self) -> Optional[SubBatchEntry]:
        self.active_probe_ops += 1
        return self._entries[-1] if self._entries else None
