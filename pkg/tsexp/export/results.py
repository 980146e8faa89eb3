"""Result writer for CLI runs.

JSON results are validated against the shipped schemas in `schemas/` before
they touch disk; CSVs (experiments, null draws, study tables) are written via
pandas. Layout under `output_dir/`:

  <name>.json            estimate / test / pooled results
  <name>_draws.csv       retained null draws (column `draw`)
  <name>.csv             experiment series and plot-ready study tables
  events/events.jsonl    run event log
  transcript.md          Markdown digest of the event log
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import jsonschema
import pandas as pd
from pydantic import BaseModel

from events import EventKind, EventLog

SCHEMA_DIR = Path(__file__).resolve().parent.parent / "schemas"

SCHEMA_FOR = {
    "EstimateResult": "estimate_result.schema.json",
    "TestResult": "test_result.schema.json",
    "PooledResult": "pooled_result.schema.json",
}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    return json.loads((SCHEMA_DIR / name).read_text(encoding="utf-8"))


def result_payload(result: BaseModel) -> dict:
    """JSON-ready dict of a result, validated against its schema when one is shipped."""
    payload = json.loads(result.model_dump_json())
    schema_name = SCHEMA_FOR.get(type(result).__name__)
    if schema_name is not None:
        jsonschema.validate(payload, load_schema(schema_name))
    return payload


@dataclass
class ResultWriter:
    """Writes result files for one command and records each in the event log."""

    output_dir: Path
    command: str
    events: EventLog | None = None
    produced: list[Path] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path, summary: str | None = None) -> Path:
        self.produced.append(path)
        if self.events is not None:
            self.events.emit(self.command, EventKind.RESULT_WRITTEN, path=str(path), summary=summary)
        return path

    def write_json(self, name: str, result: BaseModel | Sequence[BaseModel], summary: str | None = None) -> Path:
        if isinstance(result, BaseModel):
            payload = result_payload(result)
        else:
            payload = [result_payload(r) for r in result]
        path = self.output_dir / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self._record(path, summary)

    def write_frame(self, name: str, frame: pd.DataFrame, summary: str | None = None) -> Path:
        path = self.output_dir / f"{name}.csv"
        frame.to_csv(path, index=False)
        return self._record(path, summary)

    def write_draws(self, name: str, draws: Sequence[float]) -> Path:
        return self.write_frame(f"{name}_draws", pd.DataFrame({"draw": list(draws)}))

    def write_transcript(self) -> Path | None:
        if self.events is None:
            return None
        path = self.output_dir / "transcript.md"
        path.write_text(self.events.to_markdown(), encoding="utf-8")
        return path
