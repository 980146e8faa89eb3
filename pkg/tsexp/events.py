"""Append-only event log for CLI runs.

Every command writes `command_started` before doing any work, one
`result_written` per output file, `warning` for recoverable data problems
(zero-variance units dropped, clamped p-values, off-tolerance volume sums),
and finally `command_completed` or `command_failed`. Events carry short
summaries; the result files themselves hold the numbers.

Concurrency: the write path uses filelock so replicate workers can append
warnings safely. The read path also takes the lock to avoid partial reads of
a line being appended.
"""

import logging
import re
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

from filelock import FileLock
from pydantic import BaseModel, Field


class EventKind(str, Enum):
    COMMAND_STARTED = "command_started"
    RESULT_WRITTEN = "result_written"
    WARNING = "warning"
    COMMAND_COMPLETED = "command_completed"
    COMMAND_FAILED = "command_failed"


class RunEvent(BaseModel):
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    command: str
    kind: EventKind
    seed: int | None = None
    path: str | None = None
    summary: str | None = None
    duration_ms: int | None = None
    error: str | None = None
    extras: dict[str, Any] = Field(default_factory=dict)


def summarize(s: str, max_len: int = 240) -> str:
    """Collapse whitespace and truncate for transcript display."""
    s = re.sub(r"\s+", " ", s).strip()
    if len(s) <= max_len:
        return s
    return s[: max_len - 3] + "..."


class EventLog:
    """Append-only JSONL event log.

    Layout under base_dir:
      events.jsonl    one RunEvent per line, append-only
      .events.lock    filelock for concurrent writers
    """

    def __init__(self, base_dir: Path) -> None:
        self._base_dir = base_dir
        base_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = base_dir / "events.jsonl"
        self._lock = FileLock(str(base_dir / ".events.lock"))

    @property
    def events_path(self) -> Path:
        return self._events_path

    def append(self, event: RunEvent) -> None:
        line = event.model_dump_json() + "\n"
        with self._lock:
            with self._events_path.open("a", encoding="utf-8") as f:
                f.write(line)

    def emit(self, command: str, kind: EventKind, **fields: Any) -> RunEvent:
        event = RunEvent(command=command, kind=kind, **fields)
        self.append(event)
        return event

    def read_all(self) -> list[RunEvent]:
        if not self._events_path.exists():
            return []
        with self._lock:
            text = self._events_path.read_text(encoding="utf-8")
        return [
            RunEvent.model_validate_json(line)
            for line in text.splitlines()
            if line.strip()
        ]

    def to_markdown(self) -> str:
        """Render the event log as a run transcript."""
        events = self.read_all()
        if not events:
            return "# Run transcript\n\n_(no events recorded)_\n"

        lines: list[str] = ["# Run transcript", ""]
        for ev in events:
            ts = ev.timestamp.strftime("%H:%M:%S")
            head = f"**[{ts}] {ev.command}** *{ev.kind.value}*"
            if ev.seed is not None:
                head += f" seed=`{ev.seed}`"
            lines.append(head)
            if ev.path:
                lines.append("")
                lines.append(f"> `{ev.path}`")
            if ev.summary:
                lines.append("")
                lines.append(f"> {ev.summary}")
            if ev.kind is EventKind.COMMAND_COMPLETED and ev.duration_ms is not None:
                lines.append("")
                lines.append(f"_{ev.duration_ms / 1000:.2f}s_")
            if ev.kind is EventKind.COMMAND_FAILED:
                lines.append("")
                lines.append(f"**FAILED**: {ev.error or '(no detail)'}")
            lines.append("")
            lines.append("---")
            lines.append("")
        return "\n".join(lines)


class EventLogHandler(logging.Handler):
    """Forward WARNING records from the package loggers into an EventLog.

    Attached by run.py for the duration of one command so that data warnings
    raised deep inside the numerics show up in the run transcript.
    """

    def __init__(self, log: EventLog, command: str) -> None:
        super().__init__(level=logging.WARNING)
        self._log = log
        self._command = command

    def emit(self, record: logging.LogRecord) -> None:
        self._log.emit(
            self._command,
            EventKind.WARNING,
            summary=summarize(record.getMessage()),
            extras={"logger": record.name},
        )
