"""Totally ordered event log with a streaming digest."""
from __future__ import annotations

import hashlib
import json
from typing import IO, Iterator


class EventTrace:
    """Events are serialised to canonical JSON as they are emitted.

    The digest covers every line, so it is available even when ``keep=False``
    and the events themselves are not retained.
    """

    def __init__(self, keep: bool = True):
        self._hash = hashlib.sha256()
        self._keep = keep
        self._lines: list[str] = []
        self.count = 0
        self.last_t = 0

    def emit(self, t, event, /, **fields) -> None:
        if t < self.last_t:
            raise ValueError(f"trace time went backwards: {t} < {self.last_t}")
        self.last_t = t
        fields["t"] = t
        fields["i"] = self.count
        fields["k"] = event
        line = json.dumps(fields, sort_keys=True, separators=(",", ":"))
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        self.count += 1
        if self._keep:
            self._lines.append(line)

    @property
    def digest(self) -> bytes:
        return self._hash.digest()

    @property
    def kept(self) -> bool:
        return self._keep

    def lines(self) -> list[str]:
        return list(self._lines)

    def events(self) -> Iterator[dict]:
        for line in self._lines:
            yield json.loads(line)

    def of_kind(self, *kinds: str) -> Iterator[dict]:
        wanted = set(kinds)
        for ev in self.events():
            if ev["k"] in wanted:
                yield ev

    def write_jsonl(self, fp: IO[str]) -> None:
        for line in self._lines:
            fp.write(line)
            fp.write("\n")

    def __len__(self) -> int:
        return self.count
