"""Observation traces: synchronized frames of hand points and object boxes.

File format: UTF-8, one JSON record per line. A header line carries
``{"image_size": [width, height]}``; each following line is one frame:

    {"frame": 0, "t": 0.0, "hands": {"right": [x, y]},
     "objects": [{"class": "cup", "bbox": [x_min, y_min, x_max, y_max],
                  "conf": 0.9}],
     "table": [x_min, y_min, x_max, y_max]}

Coordinates are image pixels, origin top-left, y growing downward (so
"above" means smaller y). ``t``, ``hands``, ``table`` and per-object
``conf`` are optional. Extra keys inside ``hands`` (other skeleton
keypoints) are ignored; unknown keys anywhere else are rejected. Writers
never emit NaN or infinity.

Traces are immutable after parsing and safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

from .errors import TraceError

HAND_SIDES = ("left", "right")


def _require_finite(value: float, what: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class Point2:
    """A 2D point in image pixels."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _require_finite(self.x, "x"))
        object.__setattr__(self, "y", _require_finite(self.y, "y"))

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left (x_min, y_min), bottom-right (x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, _require_finite(getattr(self, name), name))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"invalid box corners ({self.x_min}, {self.y_min})-({self.x_max}, {self.y_max})"
            )

    @property
    def center(self) -> Point2:
        return Point2((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def extent(self) -> tuple[float, float]:
        """Corner-to-corner vector (width, height); components are >= 0."""
        return (self.x_max - self.x_min, self.y_max - self.y_min)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def translated(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def contains_strict(self, p: Point2) -> bool:
        """True when p lies strictly inside the box (no boundary contact)."""
        return self.x_min < p.x < self.x_max and self.y_min < p.y < self.y_max

    def contains(self, p: Point2) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def centroid(box: BBox) -> Point2:
    """Midpoint of a box; the engine's notion of object position."""
    return box.center


def extent_vector(box: BBox) -> tuple[float, float]:
    """Bottom-right minus top-left corner; its angle tracks rotation."""
    return box.extent


@dataclass(frozen=True)
class Detection:
    class_name: str
    bbox: BBox
    confidence: float = 1.0

    def __post_init__(self):
        if not self.class_name:
            raise ValueError("detection class name must be non-empty")
        c = _require_finite(self.confidence, "confidence")
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence must be within [0, 1], got {c}")
        object.__setattr__(self, "confidence", c)


@dataclass(frozen=True)
class HandSet:
    """Wrist positions; either or both sides may be missing (occlusion)."""

    left: Point2 | None = None
    right: Point2 | None = None

    def get(self, side: str) -> Point2 | None:
        if side not in HAND_SIDES:
            raise ValueError(f"unknown hand side {side!r}")
        return getattr(self, side)

    def sides(self) -> tuple[str, ...]:
        return tuple(s for s in HAND_SIDES if self.get(s) is not None)


@dataclass(frozen=True)
class Frame:
    index: int
    hands: HandSet = field(default_factory=HandSet)
    detections: tuple[Detection, ...] = ()
    table: BBox | None = None
    timestamp: float | None = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"frame index must be non-negative, got {self.index}")
        if self.timestamp is not None:
            object.__setattr__(self, "timestamp", _require_finite(self.timestamp, "t"))
        object.__setattr__(self, "detections", tuple(self.detections))

    def detection(self, class_name: str) -> Detection | None:
        """First detection of a class in this frame (one instance per class)."""
        for det in self.detections:
            if det.class_name == class_name:
                return det
        return None

    def classes(self) -> tuple[str, ...]:
        return tuple(d.class_name for d in self.detections)


@dataclass(frozen=True)
class Trace:
    frames: tuple[Frame, ...]
    image_size: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.image_size is not None:
            w, h = self.image_size
            if w <= 0 or h <= 0:
                raise ValueError(f"image size must be positive, got {self.image_size}")
            object.__setattr__(self, "image_size", (int(w), int(h)))
        elif self.frames:
            raise ValueError("non-empty trace requires an image size")
        last_index = -1
        last_t = None
        for f in self.frames:
            if f.index <= last_index:
                raise ValueError(f"frame indices must be strictly increasing at {f.index}")
            last_index = f.index
            if f.timestamp is not None:
                if last_t is not None and f.timestamp < last_t:
                    raise ValueError(f"timestamps must be non-decreasing at frame {f.index}")
                last_t = f.timestamp

    def __len__(self) -> int:
        return len(self.frames)

    def lint(self) -> list[str]:
        """Non-fatal quality warnings (out-of-image boxes, duplicate classes)."""
        warnings: list[str] = []
        if self.image_size is None:
            return warnings
        w, h = self.image_size
        bounds = BBox(0, 0, w, h)
        for f in self.frames:
            seen: set[str] = set()
            for det in f.detections:
                b = det.bbox
                if not (bounds.contains(Point2(b.x_min, b.y_min)) and bounds.contains(Point2(b.x_max, b.y_max))):
                    warnings.append(f"frame {f.index}: {det.class_name} box outside image bounds")
                if det.class_name in seen:
                    warnings.append(f"frame {f.index}: duplicate detection of {det.class_name}")
                seen.add(det.class_name)
        return warnings


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------

_FRAME_KEYS = {"frame", "t", "hands", "objects", "table"}
_OBJECT_KEYS = {"class", "bbox", "conf"}


def _as_number(value, what: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceError(f"line {line}: {what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise TraceError(f"line {line}: {what} must be finite")
    return float(value)


def _parse_point(value, what: str, line: int) -> Point2:
    if not isinstance(value, list) or len(value) != 2:
        raise TraceError(f"line {line}: {what} must be [x, y]")
    return Point2(_as_number(value[0], what, line), _as_number(value[1], what, line))


def _parse_bbox(value, what: str, line: int) -> BBox:
    if not isinstance(value, list) or len(value) != 4:
        raise TraceError(f"line {line}: {what} must be [x_min, y_min, x_max, y_max]")
    coords = [_as_number(v, what, line) for v in value]
    try:
        return BBox(*coords)
    except ValueError as exc:
        raise TraceError(f"line {line}: {what}: {exc}") from None


def parse_trace(source: str | bytes | IO[str]) -> Trace:
    """Parse a trace document. Reports the offending line on errors."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        return Trace(frames=(), image_size=None)

    header_no, header_line = lines[0]
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise TraceError(f"line {header_no}: invalid JSON: {exc.msg}") from None
    if not isinstance(header, dict) or set(header) != {"image_size"}:
        raise TraceError(f"line {header_no}: expected header {{'image_size': [w, h]}}")
    size = header["image_size"]
    if (
        not isinstance(size, list)
        or len(size) != 2
        or any(isinstance(v, bool) or not isinstance(v, int) or v <= 0 for v in size)
    ):
        raise TraceError(f"line {header_no}: image_size must be two positive integers")
    image_size = (size[0], size[1])

    frames: list[Frame] = []
    last_index = -1
    for line_no, raw in lines[1:]:
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {line_no}: invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise TraceError(f"line {line_no}: frame record must be an object")
        unknown = set(rec) - _FRAME_KEYS
        if unknown:
            raise TraceError(f"line {line_no}: unknown keys {sorted(unknown)}")
        if "frame" not in rec or isinstance(rec["frame"], bool) or not isinstance(rec["frame"], int):
            raise TraceError(f"line {line_no}: 'frame' must be an integer")
        index = rec["frame"]
        if index <= last_index:
            raise TraceError(
                f"line {line_no}: frame index {index} not greater than previous {last_index}"
            )
        last_index = index

        timestamp = None
        if "t" in rec and rec["t"] is not None:
            timestamp = _as_number(rec["t"], "t", line_no)

        hands = HandSet()
        if "hands" in rec and rec["hands"] is not None:
            hv = rec["hands"]
            if not isinstance(hv, dict):
                raise TraceError(f"line {line_no}: 'hands' must be an object")
            sides = {}
            for side in HAND_SIDES:
                if side in hv and hv[side] is not None:
                    sides[side] = _parse_point(hv[side], f"hands.{side}", line_no)
            # other keypoints are tolerated and dropped
            hands = HandSet(**sides)

        detections: list[Detection] = []
        objs = rec.get("objects", [])
        if objs is None:
            objs = []
        if not isinstance(objs, list):
            raise TraceError(f"line {line_no}: 'objects' must be a list")
        for obj in objs:
            if not isinstance(obj, dict):
                raise TraceError(f"line {line_no}: object entry must be an object")
            unknown = set(obj) - _OBJECT_KEYS
            if unknown:
                raise TraceError(f"line {line_no}: unknown object keys {sorted(unknown)}")
            if "class" not in obj or not isinstance(obj["class"], str) or not obj["class"]:
                raise TraceError(f"line {line_no}: object 'class' must be a non-empty string")
            if "bbox" not in obj:
                raise TraceError(f"line {line_no}: object {obj['class']!r} missing 'bbox'")
            bbox = _parse_bbox(obj["bbox"], f"bbox of {obj['class']}", line_no)
            conf = 1.0
            if "conf" in obj and obj["conf"] is not None:
                conf = _as_number(obj["conf"], "conf", line_no)
            try:
                detections.append(Detection(obj["class"], bbox, conf))
            except ValueError as exc:
                raise TraceError(f"line {line_no}: {exc}") from None

        table = None
        if "table" in rec and rec["table"] is not None:
            table = _parse_bbox(rec["table"], "table", line_no)

        if index < 0:
            raise TraceError(f"line {line_no}: frame index must be non-negative")
        frames.append(Frame(index=index, hands=hands, detections=tuple(detections),
                            table=table, timestamp=timestamp))

    try:
        return Trace(frames=tuple(frames), image_size=image_size)
    except ValueError as exc:
        raise TraceError(str(exc)) from None


def _dump(obj) -> str:
    return json.dumps(obj, allow_nan=False)


def serialize_trace(trace: Trace) -> str:
    """Canonical text form; parse(serialize(t)) equals t field for field."""
    out: list[str] = []
    if trace.image_size is not None:
        out.append(_dump({"image_size": [trace.image_size[0], trace.image_size[1]]}))
    for f in trace.frames:
        rec: dict = {"frame": f.index}
        if f.timestamp is not None:
            rec["t"] = f.timestamp
        sides = {s: [f.hands.get(s).x, f.hands.get(s).y] for s in f.hands.sides()}
        if sides:
            rec["hands"] = sides
        objs = []
        for det in f.detections:
            entry: dict = {"class": det.class_name, "bbox": det.bbox.as_list()}
            if det.confidence != 1.0:
                entry["conf"] = det.confidence
            objs.append(entry)
        rec["objects"] = objs
        if f.table is not None:
            rec["table"] = f.table.as_list()
        out.append(_dump(rec))
    return "\n".join(out) + ("\n" if out else "")


def load_trace(path) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh)


def save_trace(trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_trace(trace))
