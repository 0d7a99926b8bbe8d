"""Line-delimited structured run logs with deterministic serialization.

A log is a schema header, a strictly ordered stream of records, and a final
summary. Serialization is canonical (sorted keys, fixed separators, plain
Python scalars), so identical runs produce byte-identical logs and any log
replays to identical metrics.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import IncompleteLog, ParseError

SCHEMA = "peercoord-runlog/1"


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def dumps_record(record: dict) -> str:
    return json.dumps(_plain(record), sort_keys=True, separators=(",", ":"))


class RunLog:
    """Append-only record stream; `finish` seals it with the summary."""

    def __init__(self, header: dict):
        self.header = dict(header)
        self.records: list[dict] = []
        self.summary: dict | None = None

    def append(self, record: dict) -> None:
        if self.summary is not None:
            raise ValueError("log already finished")
        self.records.append(_plain(record))

    def finish(self, summary: dict) -> None:
        self.summary = _plain({"type": "summary", **summary})

    @property
    def finished(self) -> bool:
        return self.summary is not None

    def to_lines(self) -> list[str]:
        if not self.finished:
            raise IncompleteLog("log has no summary; run did not finish")
        head = dumps_record({"type": "header", "schema": SCHEMA, **self.header})
        return [head] + [dumps_record(r) for r in self.records] + [dumps_record(self.summary)]

    def dumps(self) -> str:
        return "\n".join(self.to_lines()) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())
        return path

    def select(self, record_type: str) -> list[dict]:
        return [r for r in self.records if r.get("type") == record_type]

    @staticmethod
    def parse(text: str) -> "RunLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise IncompleteLog("empty log")
        try:
            rows = [json.loads(ln) for ln in lines]
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad log line: {exc}") from exc
        head = rows[0]
        if head.get("type") != "header" or head.get("schema") != SCHEMA:
            raise ParseError(f"missing or unsupported schema header: {head}")
        if rows[-1].get("type") != "summary":
            raise IncompleteLog("log is truncated: no summary record")
        log = RunLog({k: v for k, v in head.items() if k not in ("type", "schema")})
        log.records = rows[1:-1]
        log.summary = rows[-1]
        return log

    @staticmethod
    def read(path: str | Path) -> "RunLog":
        return RunLog.parse(Path(path).read_text())


def platoon_arrays(log: RunLog) -> tuple:
    """(headways, velocities, leader velocities) over logged steps."""
    steps = log.select("step")
    if not steps:
        raise IncompleteLog("no step records")
    headways = np.array([s["headways"] for s in steps])
    velocities = np.array([s["velocities"] for s in steps])
    leader = np.array([s["leader_velocity"] for s in steps])
    return headways, velocities, leader


def pandemic_arrays(log: RunLog) -> tuple:
    """(new infections, infected, criticals, final deaths) per logged day."""
    init = log.select("init")
    steps = log.select("step")
    if not init or not steps:
        raise IncompleteLog("missing init or step records")
    rows = init + steps
    new_inf = np.array([r["new_infections"] for r in rows])
    infected = np.array([r["infected_total"] for r in rows])
    criticals = np.array([r["critical_total"] for r in rows])
    final_deaths = float(steps[-1]["dead_total"])
    return new_inf, infected, criticals, final_deaths
