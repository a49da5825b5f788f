"""Line-delimited trace files: one header line, then one record per timestep.

Header::

    {"format": 1, "kind": "trace", "engine": "sym-bin", "mode": "rounds",
     "n": 4, "m": 4, "a": "1/2"}

Record::

    {"t": 3, "matches": [[0, 2], [1, 0]], "weight": "3/2", "iterations": 1,
     "verdicts": {"ef1": true, "envy_bounded": true, "envy_cycle_free": true}}

``matches`` holds ``[N index, M index]`` pairs.  ``weight`` is null in time
mode.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable

from .core import FORMAT_VERSION, Pair, UsageError, format_rational, parse_rational

MODES = ("rounds", "time")
ENGINE_MODES = {"sym-bin": "rounds", "asym-cycles": "time", "round-robin": "time"}


class TraceFormatError(UsageError):
    pass


@dataclass(frozen=True)
class TraceHeader:
    engine: str | None
    mode: str
    n: int
    m: int
    a: Fraction | None = None

    def to_json(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "kind": "trace",
            "engine": self.engine,
            "mode": self.mode,
            "n": self.n,
            "m": self.m,
            "a": None if self.a is None else format_rational(self.a),
        }


@dataclass(frozen=True)
class TraceRecord:
    t: int
    matches: tuple[Pair, ...]
    weight: Fraction | None = None
    iterations: int = 0
    verdicts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "matches": [list(p) for p in self.matches],
            "weight": None if self.weight is None else format_rational(self.weight),
            "iterations": self.iterations,
            "verdicts": dict(self.verdicts),
        }

    @classmethod
    def from_report(cls, report) -> TraceRecord:
        verdicts = {
            "ef1": report.ef1,
            "envy_bounded": report.envy_bounded,
            "envy_cycle_free": report.envy_cycle_free,
        }
        if report.envy_free is not None:
            verdicts["envy_free"] = report.envy_free
        return cls(report.t, tuple(report.matches), report.weight, report.iterations, verdicts)


@dataclass
class Trace:
    header: TraceHeader
    records: list[TraceRecord] = field(default_factory=list)


def dump_trace(trace: Trace, fh: IO[str]) -> None:
    fh.write(json.dumps(trace.header.to_json(), sort_keys=True) + "\n")
    for rec in trace.records:
        fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def _record(data: dict, lineno: int) -> TraceRecord:
    try:
        t = data["t"]
        matches = tuple((int(i), int(j)) for i, j in data["matches"])
        weight = None if data.get("weight") is None else parse_rational(data["weight"])
        iterations = int(data.get("iterations", 0))
        verdicts = dict(data.get("verdicts", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"line {lineno}: malformed record ({exc})") from exc
    if not isinstance(t, int) or isinstance(t, bool):
        raise TraceFormatError(f"line {lineno}: t must be an integer")
    return TraceRecord(t, matches, weight, iterations, verdicts)


def parse_trace(lines: Iterable[str]) -> Trace:
    header = None
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"line {lineno}: not JSON ({exc.msg})") from exc
        if not isinstance(data, dict):
            raise TraceFormatError(f"line {lineno}: expected an object")
        if header is None:
            if data.get("kind") != "trace":
                raise TraceFormatError("first line must be a trace header")
            if data.get("format") != FORMAT_VERSION:
                raise TraceFormatError(f"unsupported trace format {data.get('format')}")
            if data.get("mode") not in MODES:
                raise TraceFormatError(f"unknown trace mode {data.get('mode')!r}")
            a = data.get("a")
            header = TraceHeader(data.get("engine"), data["mode"], int(data["n"]), int(data["m"]),
                                 None if a is None else parse_rational(a))
            continue
        records.append(_record(data, lineno))
    if header is None:
        raise TraceFormatError("empty trace file")
    return Trace(header, records)


def load_trace(path) -> Trace:
    with open(path) as fh:
        return parse_trace(fh)


def save_trace(trace: Trace, path) -> None:
    with open(path, "w") as fh:
        dump_trace(trace, fh)
