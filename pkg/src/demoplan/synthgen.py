"""Synthetic demonstration traces with ground-truth labels.

A Scenario scripts a tabletop demonstration at the level of intent (pick
this, pour into that, place there); the generator synthesizes clean
piecewise-linear hand and object motion realizing each step, derives the
ground-truth timeline from the clean geometry, and only then applies
observation noise. Kinematics target constraint geometry, not realism:

    approach   linear hand motion onto the object's centroid, starting
               from beyond the contact threshold
    contact    the hand rests on the centroid for the hold window
    carry      object box translating with the hand, every step longer
               than the position tolerance
    pour       the carried box's diagonal angle changes by more than the
               rotation tolerance each frame while the centroid wobbles
               above the receiving object
    place      object released at a spot (strictly inside the table
               region unless the scenario skips the table check), then
               the hand retreats beyond the contact threshold

Segments are separated by short pauses so each recognized interval closes
where the motion stops. Scripts that cannot realize their labels under
the given thresholds are rejected with the violating step named.

The noise model perturbs observations only: per-frame Gaussian jitter of
object boxes, per-detection dropout, and a constant hand-to-centroid
offset while in contact (the way a grasp on a large object's handle reads
to a wrist detector). Generation is a pure function of (scenario, noise,
thresholds); fixed seeds give byte-identical traces.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .constraints import Thresholds
from .errors import ScenarioError
from .ontology import DEFAULT_ONTOLOGY_TEXT
from .timeline import ActionInstance, Bindings, Timeline
from .trace import BBox, Detection, Frame, HandSet, Point2, Trace, save_trace, serialize_trace
from .timeline import save_timeline

_GOAL_KEYS = {"poured", "on_table", "held"}


@dataclass(frozen=True)
class NoiseModel:
    centroid_jitter_px: float = 0.0
    dropout_prob: float = 0.0
    grip_offset_px: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.centroid_jitter_px) or self.centroid_jitter_px < 0:
            raise ScenarioError(f"jitter must be finite and >= 0, got {self.centroid_jitter_px!r}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ScenarioError(f"dropout probability must be in [0, 1], got {self.dropout_prob!r}")
        if not math.isfinite(self.grip_offset_px) or self.grip_offset_px < 0:
            raise ScenarioError(f"grip offset must be finite and >= 0, got {self.grip_offset_px!r}")

    def as_dict(self) -> dict:
        return {
            "centroid_jitter_px": self.centroid_jitter_px,
            "dropout_prob": self.dropout_prob,
            "grip_offset_px": self.grip_offset_px,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class PickStep:
    object: str


@dataclass(frozen=True)
class PourStep:
    target: str


@dataclass(frozen=True)
class PlaceStep:
    at: tuple[float, float]


@dataclass(frozen=True)
class IdleStep:
    frames: int


Step = PickStep | PourStep | PlaceStep | IdleStep


@dataclass(frozen=True)
class SceneObject:
    class_name: str
    bbox: BBox


@dataclass(frozen=True)
class Scenario:
    name: str
    image_size: tuple[int, int]
    table: BBox
    objects: tuple[SceneObject, ...]
    script: tuple[Step, ...]
    park: Point2
    activity: str = "demo"
    hand: str = "right"
    init_frames: int = 12
    goal: dict = field(default_factory=dict)
    skip_table_check: bool = False
    min_frames: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.hand not in ("left", "right"):
            raise ScenarioError(f"hand must be 'left' or 'right', got {self.hand!r}")
        if self.init_frames < 1:
            raise ScenarioError("init_frames must be at least 1")
        names = [o.class_name for o in self.objects]
        if len(names) != len(set(names)):
            raise ScenarioError(f"scenario {self.name!r} repeats an object class")
        unknown = set(self.goal) - _GOAL_KEYS
        if unknown:
            raise ScenarioError(f"scenario {self.name!r}: unknown goal keys {sorted(unknown)}")

    @property
    def object_classes(self) -> tuple[str, ...]:
        return tuple(o.class_name for o in self.objects)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


# ---------------------------------------------------------------------------
# clean synthesis
# ---------------------------------------------------------------------------


@dataclass
class _Raw:
    hand: Point2
    boxes: dict[str, BBox]
    held: str | None


def _centered(center: Point2, extent: tuple[float, float]) -> BBox:
    w, h = extent
    return BBox(center.x - w / 2, center.y - h / 2, center.x + w / 2, center.y + h / 2)


class _Builder:
    def __init__(self, scenario: Scenario, th: Thresholds, rng: random.Random):
        self.sc = scenario
        self.th = th
        self.rng = rng
        self.boxes: dict[str, BBox] = {o.class_name: o.bbox for o in scenario.objects}
        self.hand = scenario.park
        self.held: str | None = None
        self.frames: list[_Raw] = []
        self.pick_spans: list[dict] = []   # one per pick step, in script order
        self.pour_spans: list[dict] = []
        self.place_spans: list[dict] = []

    def _fail(self, step: str, why: str):
        raise ScenarioError(f"scenario {self.sc.name!r}, step {step}: {why}")

    def emit(self):
        self.frames.append(_Raw(hand=self.hand, boxes=dict(self.boxes), held=self.held))

    def idle(self, n: int):
        for _ in range(n):
            self.emit()

    def _move(self, target: Point2, frames: int, carry: bool):
        start = self.hand
        for k in range(1, frames + 1):
            t = k / frames
            self.hand = Point2(start.x + (target.x - start.x) * t,
                               start.y + (target.y - start.y) * t)
            if carry and self.held:
                extent = self.boxes[self.held].extent
                self.boxes[self.held] = _centered(self.hand, extent)
            self.emit()

    def _travel_frames(self, dist: float, speed: float, minimum: int) -> int:
        return max(minimum, math.ceil(dist / speed))

    def pick(self, step: PickStep):
        obj = step.object
        if obj not in self.boxes:
            self._fail(f"pick({obj})", "object not in the scenario")
        if self.held is not None:
            self._fail(f"pick({obj})", f"hand already holds {self.held!r}")
        center = self.boxes[obj].center
        d0 = self.hand.distance_to(center)
        if d0 <= self.th.hand_distance_px:
            self._fail(f"pick({obj})", "hand already within the contact threshold at approach start")
        speed = 42.0 + self.rng.uniform(0.0, 6.0)
        na = self._travel_frames(d0, speed, 6)
        approach_start = len(self.frames)
        self._move(center, na, carry=False)
        contact = self.th.hold_frames + 2
        self.idle(contact)
        contact_end = len(self.frames) - 1
        # lift: object starts traveling with the hand
        self.held = obj
        lift = Point2(center.x, center.y - 60.0)
        nc = max(self.th.hold_frames + 2, 6)
        if 60.0 / nc <= self.th.position_tolerance_px:
            self._fail(f"pick({obj})", "lift step length not above the position tolerance")
        carry_start = len(self.frames)
        self._move(lift, nc, carry=True)
        carry_end = len(self.frames) - 1
        self.idle(2)  # settle pause closes the co-movement run
        self.pick_spans.append({
            "object": obj,
            "approach_start": approach_start,
            "contact_end": contact_end,
            "carry_start": carry_start,
            "carry_end": carry_end,
        })

    def pour(self, step: PourStep):
        dst = step.target
        if dst not in self.boxes:
            self._fail(f"pour({dst})", "target not in the scenario")
        if self.held is None:
            self._fail(f"pour({dst})", "nothing is held")
        obj = self.held
        dst_center = self.boxes[dst].center
        hover = Point2(dst_center.x, dst_center.y - 90.0)
        if hover.y <= 0:
            self._fail(f"pour({dst})", "no room above the target inside the image")
        dist = self.hand.distance_to(hover)
        nt = self._travel_frames(dist, 24.0 + self.rng.uniform(0.0, 4.0), 4)
        self._move(hover, nt, carry=True)
        self.idle(2)

        extent0 = self.boxes[obj].extent
        theta0 = math.atan2(extent0[1], extent0[0])
        diag = math.hypot(*extent0)
        n_rot = self.th.hold_frames + 3
        span = theta0 - 0.06
        dtheta = min(0.16, span / n_rot)
        if dtheta <= self.th.rotation_tolerance_rad:
            self._fail(f"pour({dst})", "per-frame rotation cannot exceed the rotation tolerance")
        amp = max(4.0, self.th.position_tolerance_px * 1.4)
        if hover.y + amp >= dst_center.y:
            self._fail(f"pour({dst})", "wobble would drop below the target centroid")
        wobble_start = len(self.frames)
        for k in range(1, n_rot + 1):
            theta = theta0 - dtheta * k
            y = hover.y + (amp if k % 2 == 1 else 0.0)
            self.hand = Point2(hover.x, y)
            self.boxes[obj] = _centered(self.hand, (diag * math.cos(theta), diag * math.sin(theta)))
            self.emit()
        wobble_end = len(self.frames) - 1
        # settle at the hover point while the box rotates back upright
        theta_now = theta0 - dtheta * n_rot
        self.hand = Point2(hover.x, hover.y)
        for k in range(1, 4):
            theta = theta_now + (theta0 - theta_now) * k / 3
            self.boxes[obj] = _centered(self.hand, (diag * math.cos(theta), diag * math.sin(theta)))
            self.emit()
        self.boxes[obj] = _centered(self.hand, extent0)
        self.pour_spans.append({
            "object": obj,
            "target": dst,
            "wobble_start": wobble_start,
            "wobble_end": wobble_end,
        })

    def place(self, step: PlaceStep):
        if self.held is None:
            self._fail("place", "nothing is held")
        obj = self.held
        spot = Point2(*step.at)
        inside = self.sc.table.contains_strict(spot)
        if self.sc.skip_table_check:
            if inside:
                self._fail("place", "skip_table_check scenario must release outside the table region")
        elif not inside:
            self._fail("place", "release spot must lie strictly inside the table region")
        dist = self.hand.distance_to(spot)
        nt = self._travel_frames(dist, 24.0 + self.rng.uniform(0.0, 4.0), 4)
        self._move(spot, nt, carry=True)
        self.idle(2)
        self.held = None  # released; the box stays put from here on
        release_frame = len(self.frames)
        d_park = self.hand.distance_to(self.sc.park)
        nr = self._travel_frames(d_park, 42.0 + self.rng.uniform(0.0, 6.0), 6)
        retreat_start = len(self.frames)
        self._move(self.sc.park, nr, carry=False)
        self.place_spans.append({
            "object": obj,
            "release_frame": release_frame,
            "retreat_start": retreat_start,
        })

    def build(self) -> list[_Raw]:
        self.idle(self.sc.init_frames)
        for step in self.sc.script:
            if isinstance(step, PickStep):
                self.pick(step)
            elif isinstance(step, PourStep):
                self.pour(step)
            elif isinstance(step, PlaceStep):
                self.place(step)
            elif isinstance(step, IdleStep):
                self.idle(step.frames)
            else:
                raise ScenarioError(f"unknown step {step!r}")
        tail = max(self.th.hold_frames + 3, self.sc.min_frames - len(self.frames))
        self.idle(tail)
        self._check_bounds()
        return self.frames

    def _check_bounds(self):
        w, h = self.sc.image_size
        for i, raw in enumerate(self.frames):
            for name, box in raw.boxes.items():
                if box.x_min < 0 or box.y_min < 0 or box.x_max > w or box.y_max > h:
                    self._fail(f"frame {i}", f"{name} box leaves the image")
            if not (0 <= raw.hand.x <= w and 0 <= raw.hand.y <= h):
                self._fail(f"frame {i}", "hand leaves the image")


# ---------------------------------------------------------------------------
# ground-truth scanning over the clean frames
# ---------------------------------------------------------------------------


def _obj_center(raw: _Raw, name: str) -> Point2:
    return raw.boxes[name].center


def _scan_labels(frames: list[_Raw], b: _Builder, sc: Scenario, th: Thresholds) -> list[ActionInstance]:
    """Derive label intervals from the clean geometry segment by segment."""
    hand = sc.hand
    labels: list[ActionInstance] = []
    picks_by_obj: dict[str, list[ActionInstance]] = {}

    def fail(step: str, why: str):
        raise ScenarioError(f"scenario {sc.name!r}, step {step}: {why}")

    pick_insts: list[ActionInstance] = []
    for span in b.pick_spans:
        obj = span["object"]
        crossing = None
        for i in range(span["approach_start"], span["contact_end"] + 1):
            if frames[i].hand.distance_to(_obj_center(frames[i], obj)) < th.hand_distance_px:
                crossing = i
                break
        if crossing is None:
            fail(f"pick({obj})", "approach never reaches within the contact threshold")
        if span["contact_end"] - crossing + 1 < th.hold_frames:
            fail(f"pick({obj})", "contact shorter than the hold window")
        carry_len = span["carry_end"] - span["carry_start"] + 1
        if carry_len < th.hold_frames:
            fail(f"pick({obj})", "carry shorter than the hold window")
        for i in range(span["carry_start"], span["carry_end"] + 1):
            step_len = _obj_center(frames[i], obj).distance_to(_obj_center(frames[i - 1], obj))
            if step_len <= th.position_tolerance_px:
                fail(f"pick({obj})", f"carry step at frame {i} not above the position tolerance")
        inst = ActionInstance("Pick", Bindings(active=obj, hand=hand), crossing, span["carry_end"])
        labels.append(inst)
        pick_insts.append(inst)
        picks_by_obj.setdefault(obj, []).append(inst)

    pour_insts: list[ActionInstance] = []
    for span in b.pour_spans:
        obj, dst = span["object"], span["target"]
        if span["wobble_end"] - span["wobble_start"] + 1 < th.hold_frames:
            fail(f"pour({dst})", "pour hold shorter than the hold window")
        preceding = [p for p in picks_by_obj.get(obj, []) if p.end < span["wobble_start"]]
        if not preceding:
            fail(f"pour({dst})", "no completed pick precedes the pour")
        pick = preceding[-1]
        inst = ActionInstance(
            "Pour", Bindings(active=obj, hand=hand, passive=dst),
            pick.start, span["wobble_end"], children=(pick,),
        )
        labels.append(inst)
        pour_insts.append(inst)

    place_insts: list[ActionInstance] = []
    if not sc.skip_table_check:
        for span in b.place_spans:
            obj = span["object"]
            crossing = None
            for i in range(span["retreat_start"], len(frames)):
                if frames[i].hand.distance_to(_obj_center(frames[i], obj)) > th.hand_distance_px:
                    crossing = i
                    break
            if crossing is None:
                fail(f"place({obj})", "hand never retreats beyond the contact threshold")
            end = crossing
            for i in range(crossing, len(frames)):
                raw = frames[i]
                still = _obj_center(raw, obj) == _obj_center(frames[i - 1], obj)
                far = raw.hand.distance_to(_obj_center(raw, obj)) > th.hand_distance_px
                on_table = sc.table.contains_strict(_obj_center(raw, obj))
                if far and still and on_table:
                    end = i
                else:
                    break
            if end - crossing + 1 < th.hold_frames:
                fail(f"place({obj})", "separation hold shorter than the hold window")
            inst = ActionInstance("Place", Bindings(active=obj, hand=hand), crossing, end)
            labels.append(inst)
            place_insts.append(inst)

    # composition: each pour pairs with the next place of the same binding
    used_places: set[int] = set()
    for pour in pour_insts:
        for idx, place in enumerate(place_insts):
            if idx in used_places:
                continue
            if place.bindings.active != pour.bindings.active:
                continue
            if place.bindings.hand != pour.bindings.hand:
                continue
            if place.start < pour.end:
                continue
            used_places.add(idx)
            labels.append(ActionInstance(
                "WateringPlant", pour.bindings, pour.start, place.end,
                children=(pour, place),
            ))
            break

    labels.sort(key=lambda i: i.sort_key())
    return labels


# ---------------------------------------------------------------------------
# noise and assembly
# ---------------------------------------------------------------------------


def _mix_seed(scenario_seed: int, noise_seed: int) -> int:
    return (scenario_seed * 1_000_003 + noise_seed * 7_919 + 17) % (2**31 - 1)


def _observe(frames: list[_Raw], sc: Scenario, noise: NoiseModel, th: Thresholds) -> Trace:
    rng = random.Random(_mix_seed(sc.seed, noise.seed))
    order = sc.object_classes
    manipulable_guess = order  # offset rule keys off proximity, not the ontology
    out: list[Frame] = []
    for idx, raw in enumerate(frames):
        hand = raw.hand
        if noise.grip_offset_px > 0.0:
            near = raw.held is not None or any(
                hand.distance_to(raw.boxes[name].center) < th.hand_distance_px
                for name in manipulable_guess
            )
            if near:
                hand = Point2(hand.x + noise.grip_offset_px, hand.y)
        detections = []
        for name in order:
            box = raw.boxes[name]
            if noise.dropout_prob > 0.0 and rng.random() < noise.dropout_prob:
                continue
            if noise.centroid_jitter_px > 0.0:
                box = box.translated(rng.gauss(0.0, noise.centroid_jitter_px),
                                     rng.gauss(0.0, noise.centroid_jitter_px))
            detections.append(Detection(name, box))
        hands = HandSet(**{sc.hand: hand})
        out.append(Frame(index=idx, hands=hands, detections=tuple(detections), table=sc.table))
    return Trace(frames=tuple(out), image_size=sc.image_size)


def generate(scenario: Scenario, noise: NoiseModel = NoiseModel(),
             thresholds: Thresholds | None = None) -> tuple[Trace, Timeline]:
    """Synthesize one labeled trace.

    Returns the observed trace (noise applied) and the ground-truth
    timeline derived from the clean geometry. Deterministic for fixed
    scenario and noise seeds.
    """
    th = thresholds if thresholds is not None else Thresholds.for_image(scenario.image_size)
    builder = _Builder(scenario, th, random.Random(_mix_seed(scenario.seed, 0) ^ 0x5EED))
    frames = builder.build()
    labels = _scan_labels(frames, builder, scenario, th)
    trace = _observe(frames, scenario, noise, th)
    trace_id = f"{scenario.name}-s{scenario.seed}"
    return trace, Timeline(tuple(labels), trace_id=trace_id, thresholds=th)


# ---------------------------------------------------------------------------
# scenario documents
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "name", "activity", "image_size", "table", "objects", "hand", "park",
    "init_frames", "script", "goal", "skip_table_check", "min_frames",
}


def scenario_to_dict(sc: Scenario) -> dict:
    script = []
    for step in sc.script:
        if isinstance(step, PickStep):
            script.append({"step": "pick", "object": step.object})
        elif isinstance(step, PourStep):
            script.append({"step": "pour", "target": step.target})
        elif isinstance(step, PlaceStep):
            script.append({"step": "place", "at": [step.at[0], step.at[1]]})
        else:
            script.append({"step": "idle", "frames": step.frames})
    return {
        "name": sc.name,
        "activity": sc.activity,
        "image_size": [sc.image_size[0], sc.image_size[1]],
        "table": sc.table.as_list(),
        "objects": [{"class": o.class_name, "bbox": o.bbox.as_list()} for o in sc.objects],
        "hand": sc.hand,
        "park": [sc.park.x, sc.park.y],
        "init_frames": sc.init_frames,
        "script": script,
        "goal": dict(sc.goal),
        "skip_table_check": sc.skip_table_check,
        "min_frames": sc.min_frames,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys {sorted(unknown)}")
    try:
        steps: list[Step] = []
        for entry in doc.get("script", []):
            kind = entry.get("step")
            if kind == "pick":
                steps.append(PickStep(entry["object"]))
            elif kind == "pour":
                steps.append(PourStep(entry["target"]))
            elif kind == "place":
                at = entry["at"]
                steps.append(PlaceStep((float(at[0]), float(at[1]))))
            elif kind == "idle":
                steps.append(IdleStep(int(entry["frames"])))
            else:
                raise ScenarioError(f"unknown script step {kind!r}")
        size = doc["image_size"]
        park = doc["park"]
        return Scenario(
            name=doc["name"],
            activity=doc.get("activity", "demo"),
            image_size=(int(size[0]), int(size[1])),
            table=BBox(*[float(v) for v in doc["table"]]),
            objects=tuple(
                SceneObject(o["class"], BBox(*[float(v) for v in o["bbox"]]))
                for o in doc.get("objects", [])
            ),
            hand=doc.get("hand", "right"),
            park=Point2(float(park[0]), float(park[1])),
            init_frames=int(doc.get("init_frames", 12)),
            script=tuple(steps),
            goal=doc.get("goal", {}) or {},
            skip_table_check=bool(doc.get("skip_table_check", False)),
            min_frames=int(doc.get("min_frames", 0)),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario document: {exc}") from None


def parse_scenarios(source) -> dict[str, Scenario]:
    """Parse a YAML document holding one scenario or a list of them."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid scenario document: {exc}") from None
    if doc is None:
        return {}
    entries = doc if isinstance(doc, list) else [doc]
    out: dict[str, Scenario] = {}
    for entry in entries:
        sc = scenario_from_dict(entry)
        if sc.name in out:
            raise ScenarioError(f"duplicate scenario name {sc.name!r}")
        out[sc.name] = sc
    return out


def serialize_scenarios(scenarios: dict[str, Scenario]) -> str:
    return yaml.safe_dump([scenario_to_dict(sc) for sc in scenarios.values()], sort_keys=False)


# ---------------------------------------------------------------------------
# built-in templates
# ---------------------------------------------------------------------------

_TABLE = BBox(40, 200, 600, 460)
_PARK = Point2(620, 60)
_SIZE = (640, 480)


def builtin_templates() -> dict[str, Scenario]:
    """Tabletop templates spanning the default knowledge base."""
    meal_blue_cup = Scenario(
        name="meal_blue_cup", activity="preparing_meal", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("blue_cup", BBox(80, 260, 120, 340)),
            SceneObject("bowl", BBox(360, 295, 440, 345)),
        ),
        park=_PARK,
        script=(PickStep("blue_cup"), PourStep("bowl"), PlaceStep((200.0, 380.0))),
        goal={"poured": [["blue_cup", "bowl"]], "on_table": ["blue_cup"], "held": None},
    )
    meal_mug = Scenario(
        name="meal_mug", activity="preparing_meal", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("mug", BBox(120, 290, 160, 370)),
            SceneObject("bowl", BBox(360, 295, 440, 345)),
        ),
        park=_PARK,
        script=(PickStep("mug"), PourStep("bowl"), PlaceStep((240.0, 390.0))),
        goal={"poured": [["mug", "bowl"]], "on_table": ["mug"], "held": None},
    )
    meal_yellow_cup_long = Scenario(
        name="meal_yellow_cup_long", activity="preparing_meal", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("yellow_cup", BBox(500, 280, 540, 360)),
            SceneObject("pot", BBox(300, 290, 380, 340)),
        ),
        park=_PARK,
        script=(PickStep("yellow_cup"), PourStep("pot"), PlaceStep((450.0, 400.0))),
        goal={"poured": [["yellow_cup", "pot"]], "on_table": ["yellow_cup"], "held": None},
        min_frames=600,
    )
    watering_plant = Scenario(
        name="watering_plant", activity="watering_plant", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("watering_can", BBox(80, 250, 130, 340)),
            SceneObject("plant", BBox(400, 280, 490, 340)),
        ),
        park=_PARK,
        script=(PickStep("watering_can"), PourStep("plant"), PlaceStep((200.0, 390.0))),
        goal={"poured": [["watering_can", "plant"]], "on_table": ["watering_can"], "held": None},
    )
    spaghetti_pot = Scenario(
        name="spaghetti_pot", activity="preparing_meal", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("spaghetti", BBox(100, 270, 136, 342)),
            SceneObject("pot", BBox(360, 290, 440, 340)),
        ),
        park=_PARK,
        script=(PickStep("spaghetti"), PourStep("pot"), PlaceStep((615.0, 300.0))),
        goal={"poured": [["spaghetti", "pot"]], "held": "spaghetti"},
        skip_table_check=True,
    )
    mug_pick_place = Scenario(
        name="mug_pick_place", activity="preparing_meal", image_size=_SIZE, table=_TABLE,
        objects=(
            SceneObject("mug", BBox(140, 280, 180, 360)),
            SceneObject("bowl", BBox(420, 300, 500, 350)),
        ),
        park=_PARK,
        script=(PickStep("mug"), PlaceStep((300.0, 400.0))),
        goal={"on_table": ["mug"], "held": None},
    )
    templates = (meal_blue_cup, meal_mug, meal_yellow_cup_long,
                 watering_plant, spaghetti_pot, mug_pick_place)
    return {t.name: t for t in templates}


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenJob:
    template: str
    seed: int
    noise: NoiseModel = NoiseModel()


def jobs_from_grid(template_names, seeds, noise_models=(NoiseModel(),)) -> list[GenJob]:
    return [
        GenJob(name, seed, noise)
        for name in template_names
        for noise in noise_models
        for seed in seeds
    ]


def _job_id(job: GenJob) -> str:
    n = job.noise
    parts = [job.template, f"s{job.seed}"]
    if n.dropout_prob:
        parts.append(f"d{n.dropout_prob:g}")
    if n.centroid_jitter_px:
        parts.append(f"j{n.centroid_jitter_px:g}")
    if n.grip_offset_px:
        parts.append(f"g{n.grip_offset_px:g}")
    if n.seed:
        parts.append(f"n{n.seed}")
    return "-".join(parts)


def batch(out_dir, templates: dict[str, Scenario], jobs: list[GenJob],
          thresholds: Thresholds | None = None, ontology_text: str = DEFAULT_ONTOLOGY_TEXT) -> dict:
    """Generate a labeled corpus directory with a manifest.

    The manifest records every job's template, seed, noise parameters,
    goal and file paths; regenerating from the same manifest reproduces
    the corpus byte for byte.
    """
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "ontology.yaml").write_text(ontology_text, encoding="utf-8")
    (root / "templates.yaml").write_text(serialize_scenarios(templates), encoding="utf-8")

    entries = []
    manifest_thresholds = None
    for job in jobs:
        if job.template not in templates:
            raise ScenarioError(f"unknown template {job.template!r}")
        sc = templates[job.template].with_seed(job.seed)
        th = thresholds if thresholds is not None else Thresholds.for_image(sc.image_size)
        if manifest_thresholds is None:
            manifest_thresholds = th
        trace, gt = generate(sc, job.noise, th)
        entry_id = _job_id(job)
        trace_name = f"{entry_id}.trace.jsonl"
        labels_name = f"{entry_id}.labels.jsonl"
        save_trace(trace, root / trace_name)
        save_timeline(gt, root / labels_name)
        entries.append({
            "id": entry_id,
            "template": job.template,
            "activity": sc.activity,
            "seed": job.seed,
            "noise": job.noise.as_dict(),
            "trace": trace_name,
            "labels": labels_name,
            "goal": dict(sc.goal),
            "objects": list(sc.object_classes),
        })
    manifest = {
        "thresholds": (manifest_thresholds or Thresholds.for_image(_SIZE)).as_dict(),
        "entries": entries,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_manifest(corpus_dir) -> dict:
    path = Path(corpus_dir) / "manifest.json"
    if not path.exists():
        raise ScenarioError(f"no manifest.json in {corpus_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def regenerate(corpus_dir, out_dir) -> dict:
    """Rebuild a corpus from its manifest (a determinism check)."""
    manifest = load_manifest(corpus_dir)
    with open(Path(corpus_dir) / "templates.yaml", "r", encoding="utf-8") as fh:
        templates = parse_scenarios(fh)
    ontology_text = (Path(corpus_dir) / "ontology.yaml").read_text(encoding="utf-8")
    jobs = [
        GenJob(e["template"], e["seed"], NoiseModel(**e["noise"]))
        for e in manifest["entries"]
    ]
    thresholds = Thresholds.from_dict(manifest["thresholds"])
    return batch(out_dir, templates, jobs, thresholds, ontology_text)
