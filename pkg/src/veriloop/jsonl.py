"""Record-per-line (JSON Lines) file helpers.

All on-disk artifacts in this package (manifests, verdict logs, assignment
files, run logs, durable service logs) share one convention: UTF-8 text,
one self-delimited JSON object per line, no header line. Writing is
byte-stable: keys are sorted and separators fixed, so identical records
always serialize to identical bytes.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator

from .errors import EngineError


class ParseError(EngineError):
    """A line of a record file could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


def dumps_record(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def read_records(path: str) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_no, record) for every non-blank line of *path*."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid record: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise ParseError(line_no, "record is not an object")
            yield line_no, record


def write_records(path: str, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_record(record))
            fh.write("\n")


def require_fields(line_no: int, record: dict[str, Any], fields: tuple[str, ...]) -> None:
    missing = [f for f in fields if f not in record]
    if missing:
        raise ParseError(line_no, f"missing fields: {', '.join(missing)}")
