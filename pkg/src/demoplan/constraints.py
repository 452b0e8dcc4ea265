"""Per-frame constraint evaluation: the predicate engine behind recognition.

Constraint ids (the vocabulary shared with the action DSL and debug dumps):

    C1   the bound active class is manipulable
    C2   the bound passive class is not manipulable
    C3   the active class affords the bound affordance
    C4   the passive class affords the bound affordance
    C5   hand-to-object distance strictly below the contact threshold
    C6   hand-to-object distance strictly above the contact threshold
    C7   C5 has held for at least the hold window of consecutive frames
    C8   C6 has held for at least the hold window of consecutive frames
    C9   object and hand both moved since the previous frame, by matching
         amounts (both displacement magnitudes above the position
         tolerance and their difference within it); a stricter
         vector-difference variant is available via ``vector_comovement``
    C10  the object box's corner-to-corner diagonal rotated since the
         previous frame by more than the rotation tolerance
    C11  the object's centroid lies strictly inside the table region
    C12  the active centroid sits above the passive one (smaller y) with
         x aligned within the column tolerance

C9 and C10 compare the step into the current frame, so both are false on
the first frame a track exists. Distances at exactly the contact
threshold make both C5 and C6 false.

Dropout handling: a track that goes unobserved coasts for up to
``coast_frames`` frames - a carried object (one that had a hand in
contact when last seen) follows that hand's motion, anything else holds
position - and then goes stale. Constraints with a stale operand evaluate
false, never raise. The consecutive counters behind C7/C8 freeze (neither
advance nor reset) on coasting frames and reset once an operand is stale.

EvalContext is single-writer: advance() must run once per frame in order.
Evaluations at the current frame are read-only and may run concurrently;
independent traces can be processed in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum

from .errors import DemoplanError
from .ontology import Ontology
from .scene import SceneState
from .trace import BBox, Frame, HAND_SIDES, Point2, Trace


class Constraint(str, Enum):
    ACTIVE_OBJECT = "C1"
    PASSIVE_OBJECT = "C2"
    ACTIVE_AFFORDANCE = "C3"
    PASSIVE_AFFORDANCE = "C4"
    HAND_NEAR = "C5"
    HAND_FAR = "C6"
    NEAR_SUSTAINED = "C7"
    FAR_SUSTAINED = "C8"
    CO_MOVING = "C9"
    ROTATING = "C10"
    ON_TABLE = "C11"
    ABOVE_PASSIVE = "C12"

    @classmethod
    def from_id(cls, cid: str) -> "Constraint":
        try:
            return cls(cid)
        except ValueError:
            raise DemoplanError(f"unknown constraint id {cid!r}") from None


STATIC_CONSTRAINTS = frozenset({
    Constraint.ACTIVE_OBJECT,
    Constraint.PASSIVE_OBJECT,
    Constraint.ACTIVE_AFFORDANCE,
    Constraint.PASSIVE_AFFORDANCE,
})

PER_FRAME_CONSTRAINTS = frozenset({
    Constraint.HAND_NEAR,
    Constraint.HAND_FAR,
    Constraint.CO_MOVING,
    Constraint.ROTATING,
    Constraint.ON_TABLE,
    Constraint.ABOVE_PASSIVE,
})

WINDOWED_CONSTRAINTS = frozenset({Constraint.NEAR_SUSTAINED, Constraint.FAR_SUSTAINED})

# roles each constraint must find in its binding
REQUIRED_ROLES: dict[Constraint, tuple[str, ...]] = {
    Constraint.ACTIVE_OBJECT: ("active",),
    Constraint.PASSIVE_OBJECT: ("passive",),
    Constraint.ACTIVE_AFFORDANCE: ("active", "affordance"),
    Constraint.PASSIVE_AFFORDANCE: ("passive", "affordance"),
    Constraint.HAND_NEAR: ("active", "hand"),
    Constraint.HAND_FAR: ("active", "hand"),
    Constraint.NEAR_SUSTAINED: ("active", "hand"),
    Constraint.FAR_SUSTAINED: ("active", "hand"),
    Constraint.CO_MOVING: ("active", "hand"),
    Constraint.ROTATING: ("active",),
    Constraint.ON_TABLE: ("active",),
    Constraint.ABOVE_PASSIVE: ("active", "passive"),
}

DEFAULT_COLUMN_FRACTION = 0.25  # of the passive box width, when no fixed tolerance is set
DEFAULT_DISTANCE_FRACTION = 0.05  # of the image diagonal


@dataclass(frozen=True)
class Thresholds:
    """Tunable tolerances governing all constraint evaluation.

    ``column_tolerance_px`` of None means "a quarter of the passive box
    width at the evaluated frame".
    """

    hand_distance_px: float = 40.0
    hold_frames: int = 5
    position_tolerance_px: float = 3.0
    rotation_tolerance_rad: float = 0.1
    column_tolerance_px: float | None = None
    coast_frames: int = 2

    def __post_init__(self):
        if not (isinstance(self.hand_distance_px, (int, float)) and self.hand_distance_px > 0):
            raise DemoplanError(f"hand distance threshold must be positive, got {self.hand_distance_px!r}")
        if not (isinstance(self.hold_frames, int) and not isinstance(self.hold_frames, bool) and self.hold_frames >= 1):
            raise DemoplanError(f"hold window must be an integer >= 1, got {self.hold_frames!r}")
        if not (isinstance(self.position_tolerance_px, (int, float)) and self.position_tolerance_px > 0):
            raise DemoplanError(f"position tolerance must be positive, got {self.position_tolerance_px!r}")
        if not (isinstance(self.rotation_tolerance_rad, (int, float)) and self.rotation_tolerance_rad > 0):
            raise DemoplanError(f"rotation tolerance must be positive, got {self.rotation_tolerance_rad!r}")
        if self.column_tolerance_px is not None and not (
            isinstance(self.column_tolerance_px, (int, float)) and self.column_tolerance_px > 0
        ):
            raise DemoplanError(f"column tolerance must be positive, got {self.column_tolerance_px!r}")
        if not (isinstance(self.coast_frames, int) and not isinstance(self.coast_frames, bool) and self.coast_frames >= 0):
            raise DemoplanError(f"coast window must be an integer >= 0, got {self.coast_frames!r}")

    @classmethod
    def for_image(cls, image_size: tuple[int, int], **overrides) -> "Thresholds":
        """Defaults scaled to the image: contact threshold at 5% of the diagonal."""
        w, h = image_size
        values = {"hand_distance_px": DEFAULT_DISTANCE_FRACTION * math.hypot(w, h)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "Thresholds":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise DemoplanError(f"unknown threshold keys {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Binding:
    """Concrete operands for one evaluation: classes, hand side, affordance."""

    active: str | None = None
    passive: str | None = None
    hand: str | None = None
    affordance: str | None = None


# track/operand status at the current frame
STATUS_OK = "ok"            # observed this frame
STATUS_DROPOUT = "dropout"  # unobserved but coasting
STATUS_STALE = "stale"      # unobserved beyond the coast window (or never seen)


class _ObjectTrack:
    __slots__ = ("center", "prev_center", "bbox", "extent", "prev_extent", "age", "carry_hand", "seen")

    def __init__(self):
        self.center: Point2 | None = None
        self.prev_center: Point2 | None = None
        self.bbox: BBox | None = None
        self.extent: tuple[float, float] | None = None
        self.prev_extent: tuple[float, float] | None = None
        self.age = 0
        self.carry_hand: str | None = None
        self.seen = False


class _HandTrack:
    __slots__ = ("pos", "prev", "age", "seen")

    def __init__(self):
        self.pos: Point2 | None = None
        self.prev: Point2 | None = None
        self.age = 0
        self.seen = False


class EvalContext:
    """Mutable evaluation state over one trace: tracks plus run counters."""

    def __init__(self, trace: Trace, scene: SceneState, ontology: Ontology,
                 thresholds: Thresholds, *, vector_comovement: bool = False):
        self.trace = trace
        self.scene = scene
        self.ontology = ontology
        self.thresholds = thresholds
        self.vector_comovement = vector_comovement
        self._frames = trace.frames
        self._pos = -1
        self._objects: dict[str, _ObjectTrack] = {}
        self._hands: dict[str, _HandTrack] = {s: _HandTrack() for s in HAND_SIDES}
        self._near: dict[tuple[str, str], int] = {}
        self._far: dict[tuple[str, str], int] = {}

    # -- frame stepping ------------------------------------------------

    @property
    def frame(self) -> Frame | None:
        return self._frames[self._pos] if self._pos >= 0 else None

    @property
    def frame_index(self) -> int:
        if self._pos < 0:
            raise DemoplanError("no frame advanced yet")
        return self._frames[self._pos].index

    @property
    def exhausted(self) -> bool:
        return self._pos + 1 >= len(self._frames)

    def advance(self) -> Frame:
        """Step to the next frame in order, updating tracks and counters."""
        if self.exhausted:
            raise DemoplanError("advance past the end of the trace")
        self._pos += 1
        frame = self._frames[self._pos]
        th = self.thresholds

        for side, ht in self._hands.items():
            p = frame.hands.get(side)
            ht.prev = ht.pos
            if p is not None:
                ht.pos = p
                ht.age = 0
                ht.seen = True
            elif ht.seen:
                ht.age += 1

        for det in frame.detections:
            if det.class_name not in self._objects:
                self._objects[det.class_name] = _ObjectTrack()
        for name, ot in self._objects.items():
            det = frame.detection(name)
            ot.prev_center = ot.center
            ot.prev_extent = ot.extent
            if det is not None:
                ot.center = det.bbox.center
                ot.bbox = det.bbox
                ot.extent = det.bbox.extent
                ot.age = 0
                ot.seen = True
                ot.carry_hand = self._contact_hand(ot.center)
            elif ot.seen:
                ot.age += 1
                if ot.carry_hand is not None and ot.age <= th.coast_frames:
                    ht = self._hands[ot.carry_hand]
                    if ht.pos is not None and ht.prev is not None:
                        dx = ht.pos.x - ht.prev.x
                        dy = ht.pos.y - ht.prev.y
                        if dx or dy:
                            ot.center = Point2(ot.center.x + dx, ot.center.y + dy)
                            ot.bbox = ot.bbox.translated(dx, dy)

        for name, ot in self._objects.items():
            for side, ht in self._hands.items():
                key = (name, side)
                if self._obj_status(ot) == STATUS_STALE or self._hand_status(ht) == STATUS_STALE:
                    self._near[key] = 0
                    self._far[key] = 0
                elif ot.age > 0 or ht.age > 0:
                    pass  # coasting frame: freeze both counters
                else:
                    d = ot.center.distance_to(ht.pos)
                    self._near[key] = self._near.get(key, 0) + 1 if d < th.hand_distance_px else 0
                    self._far[key] = self._far.get(key, 0) + 1 if d > th.hand_distance_px else 0
        return frame

    def _contact_hand(self, center: Point2) -> str | None:
        best: tuple[float, int, str] | None = None
        for side, ht in self._hands.items():
            if ht.age == 0 and ht.seen and ht.pos is not None:
                d = center.distance_to(ht.pos)
                if d < self.thresholds.hand_distance_px:
                    key = (d, 0 if side == "right" else 1, side)
                    if best is None or key < best:
                        best = key
        return best[2] if best else None

    # -- operand access ------------------------------------------------

    def _obj_status(self, ot: _ObjectTrack | None) -> str:
        if ot is None or not ot.seen or ot.age > self.thresholds.coast_frames:
            return STATUS_STALE
        return STATUS_DROPOUT if ot.age > 0 else STATUS_OK

    def _hand_status(self, ht: _HandTrack | None) -> str:
        if ht is None or not ht.seen or ht.age > self.thresholds.coast_frames:
            return STATUS_STALE
        return STATUS_DROPOUT if ht.age > 0 else STATUS_OK

    def operand_status(self, kind: str, value: str) -> str:
        """Status of a bound operand at the current frame: ok/dropout/stale."""
        if kind in ("active", "passive"):
            return self._obj_status(self._objects.get(value))
        if kind == "hand":
            return self._hand_status(self._hands.get(value))
        raise DemoplanError(f"unknown operand kind {kind!r}")

    def _usable_object(self, name: str) -> _ObjectTrack | None:
        ot = self._objects.get(name)
        return None if self._obj_status(ot) == STATUS_STALE else ot

    def _usable_hand(self, side: str) -> _HandTrack | None:
        ht = self._hands.get(side)
        return None if self._hand_status(ht) == STATUS_STALE else ht

    def object_center(self, name: str) -> Point2 | None:
        ot = self._usable_object(name)
        return ot.center if ot else None

    def hand_point(self, side: str) -> Point2 | None:
        ht = self._usable_hand(side)
        return ht.pos if ht else None

    def hand_observed(self, side: str) -> bool:
        ht = self._hands.get(side)
        return ht is not None and ht.age == 0 and ht.seen

    def hand_object_distance(self, name: str, side: str) -> float | None:
        ot = self._usable_object(name)
        ht = self._usable_hand(side)
        if ot is None or ht is None:
            return None
        return ot.center.distance_to(ht.pos)

    # -- evaluation ----------------------------------------------------

    def evaluate(self, constraint: Constraint, binding: Binding, index: int | None = None) -> bool:
        """Evaluate one constraint at the current frame.

        A binding missing a required role is a programming error and
        raises; missing *frame data* (dropout beyond coasting) makes the
        constraint false.
        """
        if self._pos < 0:
            raise DemoplanError("advance() must run before evaluation")
        if index is not None and index != self.frame_index:
            raise DemoplanError(
                f"evaluation requested at frame {index} but context is at {self.frame_index}"
            )
        for role in REQUIRED_ROLES[constraint]:
            if getattr(binding, role) is None:
                raise DemoplanError(f"{constraint.value} needs a bound {role!r}")
        th = self.thresholds

        if constraint is Constraint.ACTIVE_OBJECT:
            return self.ontology.is_manipulable(binding.active)
        if constraint is Constraint.PASSIVE_OBJECT:
            return not self.ontology.is_manipulable(binding.passive)
        if constraint is Constraint.ACTIVE_AFFORDANCE:
            return self.ontology.has_affordance(binding.active, binding.affordance)
        if constraint is Constraint.PASSIVE_AFFORDANCE:
            return self.ontology.has_affordance(binding.passive, binding.affordance)

        if constraint in (Constraint.HAND_NEAR, Constraint.HAND_FAR):
            d = self.hand_object_distance(binding.active, binding.hand)
            if d is None:
                return False
            if constraint is Constraint.HAND_NEAR:
                return d < th.hand_distance_px
            return d > th.hand_distance_px

        if constraint is Constraint.NEAR_SUSTAINED:
            return self._near.get((binding.active, binding.hand), 0) >= th.hold_frames
        if constraint is Constraint.FAR_SUSTAINED:
            return self._far.get((binding.active, binding.hand), 0) >= th.hold_frames

        if constraint is Constraint.CO_MOVING:
            ot = self._usable_object(binding.active)
            ht = self._usable_hand(binding.hand)
            if ot is None or ht is None or ot.prev_center is None or ht.prev is None:
                return False
            dpx = ot.center.x - ot.prev_center.x
            dpy = ot.center.y - ot.prev_center.y
            dhx = ht.pos.x - ht.prev.x
            dhy = ht.pos.y - ht.prev.y
            mp = math.hypot(dpx, dpy)
            mh = math.hypot(dhx, dhy)
            s = th.position_tolerance_px
            if self.vector_comovement:
                diff = math.hypot(dpx - dhx, dpy - dhy)
            else:
                diff = abs(mp - mh)
            return diff <= s and mp > s and mh > s

        if constraint is Constraint.ROTATING:
            ot = self._usable_object(binding.active)
            if ot is None or ot.prev_extent is None or ot.extent is None:
                return False
            a_prev = math.atan2(ot.prev_extent[1], ot.prev_extent[0])
            a_curr = math.atan2(ot.extent[1], ot.extent[0])
            return abs(a_curr - a_prev) > th.rotation_tolerance_rad

        if constraint is Constraint.ON_TABLE:
            p = self.object_center(binding.active)
            if p is None:
                return False
            return self.scene.table.contains_strict(p)

        if constraint is Constraint.ABOVE_PASSIVE:
            a = self._usable_object(binding.active)
            p = self._usable_object(binding.passive)
            if a is None or p is None:
                return False
            eps = th.column_tolerance_px
            if eps is None:
                if p.bbox is None:
                    return False
                eps = DEFAULT_COLUMN_FRACTION * p.bbox.width
            return abs(a.center.x - p.center.x) <= eps and a.center.y < p.center.y

        raise DemoplanError(f"unhandled constraint {constraint!r}")


def bind_hand(ctx: EvalContext, object_class: str) -> str | None:
    """The hand currently owning a contact with the object.

    Chooses the observed hand with the smaller distance to the object's
    centroid; exact ties go to the right hand. None when no hand is
    observed or the object's track is unusable.
    """
    center = ctx.object_center(object_class)
    if center is None:
        return None
    best: tuple[float, int, str] | None = None
    for side in HAND_SIDES:
        if not ctx.hand_observed(side):
            continue
        d = center.distance_to(ctx.hand_point(side))
        key = (d, 0 if side == "right" else 1, side)
        if best is None or key < best:
            best = key
    return best[2] if best else None


def truth_rows(ctx: EvalContext) -> list[dict]:
    """Per-frame constraint truth records for the current frame.

    One record per (active class, hand side, passive class) combination;
    used by the debug dump for oracle comparison. The static gates C3/C4
    are frame-invariant ontology facts and are omitted here.
    """
    idx = ctx.frame_index
    actives = sorted(c for c, a in ctx.scene.assignments.items() if a == "active")
    passives = sorted(c for c, a in ctx.scene.assignments.items() if a == "passive") or [None]
    rows: list[dict] = []
    for a in actives:
        for side in HAND_SIDES:
            for p in passives:
                b = Binding(active=a, passive=p, hand=side)
                row: dict = {"frame": idx, "active": a, "hand": side, "passive": p}
                row["C1"] = ctx.evaluate(Constraint.ACTIVE_OBJECT, b)
                row["C2"] = ctx.evaluate(Constraint.PASSIVE_OBJECT, b) if p else None
                for c in (Constraint.HAND_NEAR, Constraint.HAND_FAR,
                          Constraint.NEAR_SUSTAINED, Constraint.FAR_SUSTAINED,
                          Constraint.CO_MOVING, Constraint.ROTATING, Constraint.ON_TABLE):
                    row[c.value] = ctx.evaluate(c, b)
                row["C12"] = ctx.evaluate(Constraint.ABOVE_PASSIVE, b) if p else None
                rows.append(row)
    return rows
