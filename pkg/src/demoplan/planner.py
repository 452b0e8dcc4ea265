"""Command planning: turn a recognized timeline into abstract robot commands.

The vocabulary is deliberately small - grasp, move_over, pour_into,
place_on_table, release - mirroring a service robot's pre-modeled action
set without any kinematics. Expansion rules:

    Pick(o)        -> grasp(o)
    Pour(a, p)     -> move_over(a, p); pour_into(a, p)
    Place(o)       -> place_on_table(o)

Composed actions expand through their children without duplication: the
pick embedded in a pour emits a single grasp. Every emitted verb is
re-checked against the knowledge base (a pour into something that does
not accept pouring is rejected), and manipulation of an object that was
never grasped is rejected as dangling.

Plan files are JSON lines with stable field order:

    {"verb": "grasp", "args": ["cup"], "source_action": "Pick",
     "source_interval": [10, 45], "target": null}

simulate_plan() executes a plan against a symbolic world (a held-object
register, an on-table set, containment) and is the verification stand-in
for running commands on hardware. It models a one-armed executor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import InputError, PlanError, SimulationError
from .ontology import Ontology
from .scene import SceneState
from .timeline import ActionInstance, Timeline


class Verb(str, Enum):
    GRASP = "grasp"
    MOVE_OVER = "move_over"
    POUR_INTO = "pour_into"
    PLACE_ON_TABLE = "place_on_table"
    RELEASE = "release"


_VERB_ARITY = {
    Verb.GRASP: 1,
    Verb.MOVE_OVER: 2,
    Verb.POUR_INTO: 2,
    Verb.PLACE_ON_TABLE: 1,
    Verb.RELEASE: 1,
}

# affordances each verb's arguments must carry, by argument position
_VERB_AFFORDANCES: dict[Verb, tuple[tuple[int, str], ...]] = {
    Verb.GRASP: ((0, "pick"),),
    Verb.MOVE_OVER: ((0, "pour"), (1, "accept_pouring")),
    Verb.POUR_INTO: ((0, "pour"), (1, "accept_pouring")),
    Verb.PLACE_ON_TABLE: ((0, "place"),),
    Verb.RELEASE: (),
}

# timeline actions that expand directly to commands
_PRIMITIVE_ACTIONS = ("Pick", "Pour", "Place")


@dataclass(frozen=True)
class Command:
    verb: Verb
    args: tuple[str, ...]
    source_action: str
    source_interval: tuple[int, int]
    target: tuple[float, float] | None = None

    def __post_init__(self):
        if len(self.args) != _VERB_ARITY[self.verb]:
            raise PlanError(
                f"{self.verb.value} takes {_VERB_ARITY[self.verb]} argument(s), got {len(self.args)}"
            )
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "source_interval", tuple(self.source_interval))


@dataclass(frozen=True)
class CommandPlan:
    commands: tuple[Command, ...]
    source: str = "timeline"

    def __post_init__(self):
        object.__setattr__(self, "commands", tuple(self.commands))

    def __len__(self) -> int:
        return len(self.commands)


def _unique_primitives(timeline: Timeline) -> list[ActionInstance]:
    """Unique primitive instances in chronological order.

    Composites contribute through their children; a primitive reached
    both at the top level and as somebody's child (a pour's embedded
    pick) expands once.
    """
    seen: set[tuple] = set()
    primitives: list[ActionInstance] = []

    def walk(inst: ActionInstance):
        if inst.action in _PRIMITIVE_ACTIONS:
            key = inst.identity()
            if key not in seen:
                seen.add(key)
                primitives.append(inst)
        for child in inst.children:
            walk(child)

    for inst in timeline.instances:
        walk(inst)
    primitives.sort(key=lambda i: i.sort_key())
    return primitives


def plan(timeline: Timeline, ontology: Ontology, scene: SceneState | None = None) -> CommandPlan:
    """Expand a timeline into a command plan.

    Raises PlanError on an affordance violation or on manipulation of an
    object that was never grasped. Recognized actions outside the
    primitive vocabulary are skipped (they carry no execution semantics).
    When a scene is supplied, place commands carry the stored table
    centroid as a target and metadata consumers can restore the object's
    initial position instead.
    """
    commands: list[Command] = []
    held_open: set[str] = set()
    for inst in _unique_primitives(timeline):
        interval = (inst.start, inst.end)
        b = inst.bindings
        if inst.action == "Pick":
            emit = [Command(Verb.GRASP, (b.active,), inst.action, interval)]
            held_open.add(b.active)
        elif inst.action == "Pour":
            emit = [
                Command(Verb.MOVE_OVER, (b.active, b.passive), inst.action, interval),
                Command(Verb.POUR_INTO, (b.active, b.passive), inst.action, interval),
            ]
        else:  # Place
            target = None
            if scene is not None:
                c = scene.table.center
                target = (c.x, c.y)
            emit = [Command(Verb.PLACE_ON_TABLE, (b.active,), inst.action, interval, target)]
        for cmd in emit:
            for pos, affordance in _VERB_AFFORDANCES[cmd.verb]:
                name = cmd.args[pos]
                if affordance not in ontology.affordance_names or not ontology.has_affordance(name, affordance):
                    raise PlanError(
                        f"{cmd.verb.value} requires {affordance!r} on {name!r} "
                        f"(from {inst.action} at [{inst.start}, {inst.end}])"
                    )
            if cmd.verb in (Verb.MOVE_OVER, Verb.POUR_INTO, Verb.PLACE_ON_TABLE, Verb.RELEASE):
                if cmd.args[0] not in held_open:
                    raise PlanError(
                        f"dangling manipulation: {cmd.verb.value} of {cmd.args[0]!r} without a prior grasp"
                    )
            commands.append(cmd)
            if cmd.verb in (Verb.PLACE_ON_TABLE, Verb.RELEASE):
                held_open.discard(cmd.args[0])
    return CommandPlan(tuple(commands), source=timeline.trace_id)


def lint_plan(cmd_plan: CommandPlan) -> list[str]:
    """Non-fatal warnings, e.g. a grasp never followed by release or place."""
    warnings: list[str] = []
    open_grasps: dict[str, int] = {}
    for i, cmd in enumerate(cmd_plan.commands):
        if cmd.verb is Verb.GRASP:
            if cmd.args[0] in open_grasps:
                warnings.append(f"command {i}: grasp of {cmd.args[0]!r} while already held")
            open_grasps[cmd.args[0]] = i
        elif cmd.verb in (Verb.PLACE_ON_TABLE, Verb.RELEASE):
            open_grasps.pop(cmd.args[0], None)
    for name, i in open_grasps.items():
        warnings.append(f"command {i}: grasp of {name!r} never released or placed")
    return warnings


# ---------------------------------------------------------------------------
# symbolic execution
# ---------------------------------------------------------------------------


@dataclass
class WorldState:
    """Abstract world: one gripper, a table, containment facts."""

    held: str | None = None
    over: tuple[str, str] | None = None
    on_table: set[str] = field(default_factory=set)
    contains: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def poured_pairs(self) -> set[tuple[str, str]]:
        return {(src, dst) for dst, srcs in self.contains.items() for src in srcs}


def simulate_plan(cmd_plan: CommandPlan, initial_objects) -> WorldState:
    """Execute a plan symbolically from a scene's initial placements.

    ``initial_objects`` is any iterable of class names resting on the
    table at start (a Scenario's object classes work directly). Raises
    SimulationError on the first precondition failure.
    """
    state = WorldState(on_table=set(initial_objects))
    for i, cmd in enumerate(cmd_plan.commands):
        where = f"command {i} ({cmd.verb.value})"
        if cmd.verb is Verb.GRASP:
            obj = cmd.args[0]
            if state.held is not None:
                raise SimulationError(f"{where}: already holding {state.held!r}")
            if obj not in state.on_table:
                raise SimulationError(f"{where}: {obj!r} is not on the table")
            state.held = obj
            state.on_table.discard(obj)
            state.over = None
        elif cmd.verb is Verb.MOVE_OVER:
            src, dst = cmd.args
            if state.held != src:
                raise SimulationError(f"{where}: not holding {src!r}")
            state.over = (src, dst)
        elif cmd.verb is Verb.POUR_INTO:
            src, dst = cmd.args
            if state.held != src:
                raise SimulationError(f"{where}: not holding {src!r}")
            if state.over != (src, dst):
                raise SimulationError(f"{where}: {src!r} is not over {dst!r}")
            state.contains[dst] = state.contains.get(dst, ()) + (src,)
        elif cmd.verb is Verb.PLACE_ON_TABLE:
            obj = cmd.args[0]
            if state.held != obj:
                raise SimulationError(f"{where}: not holding {obj!r}")
            state.held = None
            state.over = None
            state.on_table.add(obj)
        elif cmd.verb is Verb.RELEASE:
            obj = cmd.args[0]
            if state.held != obj:
                raise SimulationError(f"{where}: not holding {obj!r}")
            state.held = None
            state.over = None
    return state


_GOAL_KEYS = {"poured", "on_table", "held"}


def check_goal(state: WorldState, goal: dict) -> list[str]:
    """Unmet goal assertions; empty means the goal state is reached.

    Goal keys: ``poured`` (list of [src, dst] pairs that must have
    happened), ``on_table`` (objects that must rest on the table),
    ``held`` (what must be in the gripper; null means an empty gripper).
    Absent keys are unchecked.
    """
    unknown = set(goal) - _GOAL_KEYS
    if unknown:
        raise InputError(f"unknown goal keys {sorted(unknown)}")
    failures: list[str] = []
    for pair in goal.get("poured", []) or []:
        src, dst = pair
        if (src, dst) not in state.poured_pairs():
            failures.append(f"nothing was poured from {src!r} into {dst!r}")
    for obj in goal.get("on_table", []) or []:
        if obj not in state.on_table:
            failures.append(f"{obj!r} did not end up on the table")
    if "held" in goal:
        want = goal["held"]
        if state.held != want:
            failures.append(f"gripper holds {state.held!r}, expected {want!r}")
    return failures


# ---------------------------------------------------------------------------
# plan files
# ---------------------------------------------------------------------------


def serialize_plan(cmd_plan: CommandPlan) -> str:
    lines = [json.dumps({"source": cmd_plan.source}, allow_nan=False)]
    for cmd in cmd_plan.commands:
        rec = {
            "verb": cmd.verb.value,
            "args": list(cmd.args),
            "source_action": cmd.source_action,
            "source_interval": list(cmd.source_interval),
            "target": list(cmd.target) if cmd.target is not None else None,
        }
        lines.append(json.dumps(rec, allow_nan=False))
    return "\n".join(lines) + "\n"


def parse_plan(source) -> CommandPlan:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise InputError("empty plan document")
    try:
        header = json.loads(lines[0][1])
    except json.JSONDecodeError as exc:
        raise InputError(f"line 1: invalid JSON: {exc.msg}") from None
    if not isinstance(header, dict) or "source" not in header:
        raise InputError("plan header must carry 'source'")
    commands: list[Command] = []
    for line_no, raw in lines[1:]:
        try:
            rec = json.loads(raw)
            verb = Verb(rec["verb"])
            target = tuple(rec["target"]) if rec.get("target") is not None else None
            commands.append(Command(
                verb=verb,
                args=tuple(rec["args"]),
                source_action=rec["source_action"],
                source_interval=(int(rec["source_interval"][0]), int(rec["source_interval"][1])),
                target=target,
            ))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise InputError(f"line {line_no}: invalid plan record: {exc}") from None
    return CommandPlan(tuple(commands), source=header["source"])


def load_plan(path) -> CommandPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_plan(fh)


def save_plan(cmd_plan: CommandPlan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_plan(cmd_plan))
