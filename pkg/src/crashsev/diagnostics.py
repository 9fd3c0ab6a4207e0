"""Counted diagnostics collected while processing data."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

log = logging.getLogger("crashsev")


class DataError(ValueError):
    """Input data cannot be processed (bad file, missing column, broken contract)."""


@dataclass
class Diagnostics:
    counts: Counter = field(default_factory=Counter)
    messages: list[str] = field(default_factory=list)
    max_messages: int = 1000

    def add(self, kind: str, message: str | None = None, n: int = 1) -> None:
        self.counts[kind] += n
        if message is not None:
            log.debug("%s: %s", kind, message)
            if len(self.messages) < self.max_messages:
                self.messages.append(f"{kind}: {message}")

    def __getitem__(self, kind: str) -> int:
        return self.counts[kind]

    def merge(self, other: "Diagnostics") -> None:
        self.counts.update(other.counts)
        room = self.max_messages - len(self.messages)
        self.messages.extend(other.messages[:max(room, 0)])

    def to_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "messages": list(self.messages)}
