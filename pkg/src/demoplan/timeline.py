"""Recognized action instances and timelines, with their file format.

Timeline files are JSON lines: a header record carrying the source trace
id and the thresholds in effect, then one record per instance:

    {"action": "Pick", "bindings": {"active": "cup", "hand": "right",
     "passive": null}, "start": 10, "end": 45, "children": []}

Children of composed actions nest recursively inside the record.
Intervals are inclusive frame-index ranges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .constraints import Thresholds
from .errors import InputError


@dataclass(frozen=True)
class Bindings:
    """Concrete role assignment of one instance, keyed by role kind."""

    active: str | None = None
    hand: str | None = None
    passive: str | None = None

    def as_dict(self) -> dict:
        return {"active": self.active, "hand": self.hand, "passive": self.passive}

    def key(self) -> tuple:
        return (self.active or "", self.hand or "", self.passive or "")


@dataclass(frozen=True)
class ActionInstance:
    action: str
    bindings: Bindings
    start: int
    end: int
    children: tuple["ActionInstance", ...] = ()

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"instance {self.action}: start {self.start} > end {self.end}")
        for child in self.children:
            if child.start < self.start or child.end > self.end:
                raise ValueError(
                    f"instance {self.action}: child {child.action} interval "
                    f"[{child.start}, {child.end}] outside [{self.start}, {self.end}]"
                )
        object.__setattr__(self, "children", tuple(self.children))

    def sort_key(self) -> tuple:
        return (self.start, self.end, self.action, self.bindings.key())

    def identity(self) -> tuple:
        """A run-independent identity: same action, bindings and interval."""
        return (self.action, self.bindings.key(), self.start, self.end)


@dataclass(frozen=True)
class Timeline:
    instances: tuple[ActionInstance, ...]
    trace_id: str = "trace"
    thresholds: Thresholds | None = None

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))

    def __len__(self) -> int:
        return len(self.instances)

    def by_action(self, name: str) -> tuple[ActionInstance, ...]:
        return tuple(i for i in self.instances if i.action == name)


def _instance_record(inst: ActionInstance) -> dict:
    return {
        "action": inst.action,
        "bindings": inst.bindings.as_dict(),
        "start": inst.start,
        "end": inst.end,
        "children": [_instance_record(c) for c in inst.children],
    }


def _instance_from_record(rec: dict, where: str) -> ActionInstance:
    try:
        bindings = Bindings(**rec["bindings"])
        children = tuple(_instance_from_record(c, where) for c in rec.get("children", []))
        return ActionInstance(
            action=rec["action"],
            bindings=bindings,
            start=int(rec["start"]),
            end=int(rec["end"]),
            children=children,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: invalid timeline record: {exc}") from None


def serialize_timeline(timeline: Timeline) -> str:
    header: dict = {"trace_id": timeline.trace_id}
    if timeline.thresholds is not None:
        header["thresholds"] = timeline.thresholds.as_dict()
    lines = [json.dumps(header, allow_nan=False)]
    lines.extend(json.dumps(_instance_record(i), allow_nan=False) for i in timeline.instances)
    return "\n".join(lines) + "\n"


def parse_timeline(source) -> Timeline:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise InputError("empty timeline document")
    try:
        header = json.loads(lines[0][1])
    except json.JSONDecodeError as exc:
        raise InputError(f"line 1: invalid JSON: {exc.msg}") from None
    if not isinstance(header, dict) or "trace_id" not in header:
        raise InputError("timeline header must carry 'trace_id'")
    thresholds = None
    if header.get("thresholds") is not None:
        thresholds = Thresholds.from_dict(header["thresholds"])
    instances = []
    for line_no, raw in lines[1:]:
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InputError(f"line {line_no}: invalid JSON: {exc.msg}") from None
        instances.append(_instance_from_record(rec, f"line {line_no}"))
    return Timeline(tuple(instances), trace_id=header["trace_id"], thresholds=thresholds)


def load_timeline(path) -> Timeline:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_timeline(fh)


def save_timeline(timeline: Timeline, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_timeline(timeline))
