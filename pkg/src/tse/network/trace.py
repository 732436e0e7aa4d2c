"""Machine-readable run trace: messages, phase transitions, outcomes."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

from .messages import PARTICIPANT_KINDS, MessageKind


@dataclass
class Trace:
    events: list[dict] = field(default_factory=list)
    record_messages: bool = True

    def __post_init__(self):
        self._kinds: list[tuple[MessageKind, int, int]] = []

    def message(self, kind: MessageKind, src: int, dst: int, size: int, instance: bytes = b"") -> None:
        self._kinds.append((kind, src, dst))
        if self.record_messages:
            self.events.append(
                {"type": "message", "kind": kind.name, "src": src, "dst": dst, "bytes": size, "instance": instance.hex()}
            )

    def phase(self, node: int, instance: bytes, phase: str, detail: str = "") -> None:
        self.events.append(
            {"type": "phase", "node": node, "instance": instance.hex(), "phase": phase, "detail": detail, "t": time.monotonic()}
        )

    def note(self, **fields) -> None:
        self.events.append({"type": "note", **fields})

    def mark(self) -> int:
        return len(self._kinds)

    def participant_messages(self, since: int = 0) -> int:
        return sum(1 for kind, _, _ in self._kinds[since:] if kind in PARTICIPANT_KINDS)

    def control_messages(self, since: int = 0) -> int:
        return sum(1 for kind, _, _ in self._kinds[since:] if kind not in PARTICIPANT_KINDS)

    def by_kind(self, since: int = 0) -> dict[str, int]:
        return dict(Counter(kind.name for kind, _, _ in self._kinds[since:]))

    def phases(self, node: int | None = None) -> list[dict]:
        return [e for e in self.events if e["type"] == "phase" and (node is None or e["node"] == node)]
