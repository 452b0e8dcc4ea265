"""Sequence matching: action definitions against an evaluated trace.

For every definition and every concrete role assignment that passes the
static knowledge-base gates, a small state machine walks the trace:

  * prerequisite sub-actions ('after'/'embed') must have completed before
    any phase frame counts; each completed child feeds at most one parent
    instance per consuming definition;
  * the current phase's conjunction must hold for its duration on
    consecutive frames - detector dropout within the coast window freezes
    the count, anything worse resets it;
  * when the final phase has held for its duration the match stays open
    while the conjunction keeps holding, and the instance is emitted when
    it breaks (or the trace ends), spanning from the first frame of the
    first phase (or the first embedded child's start) to the last holding
    frame;
  * after emitting, a machine re-arms only once its first phase goes
    false, so a contact that simply persists cannot retrigger the same
    action.

Hand roles are resolved per machine side; while a machine is counting its
first phase, only the side currently owning the contact (nearest observed
hand, ties to the right) may count. Definitions without phases are pure
compositions, emitted as soon as their embedded children complete in
order.

Matching is a deterministic single pass; machines are independent within
a frame, and separate traces can be matched in parallel.
"""

from __future__ import annotations

from .actions import ActionDefinition, builtin_definitions, topo_order
from .constraints import (
    Binding,
    Constraint,
    EvalContext,
    REQUIRED_ROLES,
    STATUS_DROPOUT,
    STATUS_OK,
    STATUS_STALE,
    Thresholds,
    bind_hand,
)
from .errors import MatchError
from .ontology import Ontology
from .scene import ACTIVE, PASSIVE, SceneState
from .timeline import ActionInstance, Bindings, Timeline
from .trace import HAND_SIDES, Trace


class _Registry:
    """Completed instances plus per-consumer usage bookkeeping."""

    def __init__(self):
        self._done: dict[str, list[ActionInstance]] = {}
        self._used: set[tuple[str, str, int]] = set()
        self.emitted: list[ActionInstance] = []

    def add(self, inst: ActionInstance) -> None:
        self._done.setdefault(inst.action, []).append(inst)
        self.emitted.append(inst)

    def earliest(self, consumer: str, action: str, matches, min_start: int | None = None):
        """Earliest unconsumed completed instance satisfying the predicate."""
        best = None
        for idx, inst in enumerate(self._done.get(action, ())):
            if (consumer, action, idx) in self._used:
                continue
            if min_start is not None and inst.start < min_start:
                continue
            if not matches(inst):
                continue
            key = (inst.start, inst.end, idx)
            if best is None or key < best[0]:
                best = (key, idx, inst)
        if best is None:
            return None
        return best[1], best[2]

    def consume(self, consumer: str, action: str, idx: int) -> None:
        self._used.add((consumer, action, idx))


class _Slot:
    __slots__ = ("ref", "idx", "instance")

    def __init__(self, ref):
        self.ref = ref
        self.idx: int | None = None
        self.instance: ActionInstance | None = None

    def clear(self):
        self.idx = None
        self.instance = None


class _Machine:
    def __init__(self, defn: ActionDefinition, values: dict[str, str],
                 defs_by_name: dict[str, ActionDefinition], thresholds: Thresholds):
        self.defn = defn
        self.values = values  # role name -> concrete class / hand side
        self.defs_by_name = defs_by_name
        self.thresholds = thresholds
        self.require_slots = [_Slot(ref) for ref in defn.requires]
        self.embed_slots = [_Slot(ref) for ref in defn.embeds]
        self.phase_idx = 0
        self.counter = 0
        self.mark: int | None = None
        self.extend_end: int | None = None
        self.latched = False
        hand_role = defn.role_of_kind("hand")
        self.hand_role = hand_role.name if hand_role else None
        active_role = defn.role_of_kind("active")
        self.active_value = values[active_role.name] if active_role else None
        self.is_root = not defn.requires and not defn.embeds

    # -- helpers ---------------------------------------------------------

    def _term_binding(self, term) -> Binding:
        kwargs: dict[str, str] = {}
        needed = [r for r in REQUIRED_ROLES[term.constraint] if r != "affordance"]
        for kind, role_name in zip(needed, term.roles):
            kwargs[kind] = self.values[role_name]
        return Binding(**kwargs)

    def _phase_status(self, ctx: EvalContext, phase) -> str:
        worst = STATUS_OK
        for term in phase.terms:
            needed = [r for r in REQUIRED_ROLES[term.constraint] if r != "affordance"]
            for kind, role_name in zip(needed, term.roles):
                status = ctx.operand_status(kind, self.values[role_name])
                if status == STATUS_STALE:
                    return STATUS_STALE
                if status == STATUS_DROPOUT:
                    worst = STATUS_DROPOUT
        return worst

    def _phase_holds(self, ctx: EvalContext, phase) -> bool:
        for term in phase.terms:
            value = ctx.evaluate(term.constraint, self._term_binding(term))
            if term.negated:
                value = not value
            if not value:
                return False
        return True

    def _duration(self, phase) -> int:
        return phase.duration if phase.duration is not None else self.thresholds.hold_frames

    def _matches_ref(self, ref):
        child = self.defs_by_name[ref.action]

        def predicate(inst: ActionInstance) -> bool:
            for parent_role_name, child_role in zip(ref.role_map, child.roles):
                if getattr(inst.bindings, child_role.kind) != self.values[parent_role_name]:
                    return False
            return True

        return predicate

    def _fill(self, ctx: EvalContext, registry: _Registry) -> bool:
        ok = True
        for slot in self.require_slots:
            if slot.instance is None:
                found = registry.earliest(self.defn.name, slot.ref.action, self._matches_ref(slot.ref))
                if found is None:
                    ok = False
                else:
                    slot.idx, slot.instance = found
        prev_end: int | None = None
        for i, slot in enumerate(self.embed_slots):
            if slot.instance is None:
                if i > 0 and prev_end is None:
                    ok = False
                    break
                found = registry.earliest(
                    self.defn.name, slot.ref.action, self._matches_ref(slot.ref), min_start=prev_end
                )
                if found is None:
                    ok = False
                    break
                slot.idx, slot.instance = found
            prev_end = slot.instance.end
        return ok

    def _bindings(self) -> Bindings:
        out: dict[str, str] = {}
        for role in self.defn.roles:
            out[role.kind] = self.values[role.name]
        return Bindings(**out)

    def _emit(self, registry: _Registry) -> None:
        children = tuple(slot.instance for slot in self.embed_slots)
        if children:
            start = children[0].start
        else:
            start = self.mark
        end = self.extend_end if self.defn.phases else children[-1].end
        inst = ActionInstance(self.defn.name, self._bindings(), start, end, children)
        for slot in self.require_slots + self.embed_slots:
            registry.consume(self.defn.name, slot.ref.action, slot.idx)
            slot.clear()
        registry.add(inst)
        self.phase_idx = 0
        self.counter = 0
        self.mark = None
        self.extend_end = None
        self.latched = bool(self.defn.phases)

    def _reset_progress(self) -> None:
        self.phase_idx = 0
        self.counter = 0
        self.mark = None
        self.extend_end = None

    # -- frame stepping ----------------------------------------------------

    def step(self, ctx: EvalContext, registry: _Registry) -> None:
        phases = self.defn.phases

        if self.latched:
            first = phases[0]
            status = self._phase_status(ctx, first)
            if status == STATUS_STALE or (status == STATUS_OK and not self._phase_holds(ctx, first)):
                self.latched = False
                self._reset_progress()
            return

        if not self._fill(ctx, registry):
            return

        if not phases:
            self._emit(registry)
            return

        frame_idx = ctx.frame_index
        if self.extend_end is not None:
            last = phases[-1]
            status = self._phase_status(ctx, last)
            if status == STATUS_OK and self._phase_holds(ctx, last):
                self.extend_end = frame_idx
                return
            if status == STATUS_DROPOUT:
                return
            self._emit(registry)
            return

        phase = phases[self.phase_idx]
        status = self._phase_status(ctx, phase)
        if status == STATUS_STALE:
            self.counter = 0
            if self.phase_idx == 0:
                self.mark = None
            return
        if status == STATUS_DROPOUT:
            return
        holds = self._phase_holds(ctx, phase)
        if holds and self.phase_idx == 0 and self.is_root and self.hand_role is not None:
            # contact ownership: only the nearest observed hand may count
            if bind_hand(ctx, self.active_value) != self.values[self.hand_role]:
                holds = False
        if holds:
            if self.phase_idx == 0 and self.counter == 0:
                self.mark = frame_idx
            self.counter += 1
            if self.counter >= self._duration(phase):
                if self.phase_idx + 1 == len(phases):
                    self.extend_end = frame_idx
                else:
                    self.phase_idx += 1
                    self.counter = 0
        else:
            self.counter = 0
            if self.phase_idx == 0:
                self.mark = None

    def flush(self, ctx: EvalContext, registry: _Registry) -> None:
        """End-of-trace: close open matches and assemble pending composites."""
        if self.latched:
            return
        if self.defn.phases:
            if self.extend_end is not None:
                self._emit(registry)
        else:
            if self._fill(ctx, registry):
                self._emit(registry)


def _static_ok(defn: ActionDefinition, role_name: str, value: str, ontology: Ontology) -> bool:
    for check in defn.static:
        if check.role != role_name:
            continue
        if check.constraint is Constraint.ACTIVE_OBJECT:
            if not ontology.is_manipulable(value):
                return False
        elif check.constraint is Constraint.PASSIVE_OBJECT:
            if ontology.is_manipulable(value):
                return False
        elif check.constraint in (Constraint.ACTIVE_AFFORDANCE, Constraint.PASSIVE_AFFORDANCE):
            if check.affordance not in ontology.affordance_names:
                return False
            if not ontology.has_affordance(value, check.affordance):
                return False
    return True


def _candidate_values(defn: ActionDefinition, assignments: dict[str, str],
                      ontology: Ontology) -> list[dict[str, str]]:
    actives = sorted(c for c, a in assignments.items() if a == ACTIVE)
    passives = sorted(c for c, a in assignments.items() if a != ACTIVE)
    pools: list[tuple[str, list[str]]] = []
    for role in defn.roles:
        if role.kind == "hand":
            pool = list(HAND_SIDES)
        elif role.kind == "active":
            pool = [c for c in actives if _static_ok(defn, role.name, c, ontology)]
        else:
            pool = [c for c in passives if _static_ok(defn, role.name, c, ontology)]
        pools.append((role.name, pool))

    combos: list[dict[str, str]] = [{}]
    for role_name, pool in pools:
        combos = [dict(c, **{role_name: v}) for c in combos for v in pool]
    return combos


def match(trace: Trace, scene: SceneState, ontology: Ontology, thresholds: Thresholds,
          definitions: tuple[ActionDefinition, ...] | None = None, *,
          lenient: bool = False, vector_comovement: bool = False,
          trace_id: str = "trace", on_frame=None) -> Timeline:
    """Recognize actions over a trace and return the timeline.

    Strict mode (default) rejects object classes that were not present
    during the initial scene window; ``lenient`` admits any class the
    ontology knows, classifying it on first sight. ``on_frame(ctx)`` is an
    optional per-frame callback used for debug dumps.
    """
    if not trace.frames:
        raise MatchError("cannot recognize actions on an empty trace")
    defs = definitions if definitions is not None else builtin_definitions()
    defs_by_name = {d.name: d for d in defs}

    assignments = dict(scene.assignments)
    for frame in trace.frames:
        for name in frame.classes():
            if name in assignments:
                continue
            if not lenient:
                raise MatchError(
                    f"frame {frame.index}: object class {name!r} not present in the "
                    "initial scene (use lenient mode to admit it)"
                )
            spec = ontology.spec_for(name)  # raises UnknownClassError when unknown
            assignments[name] = ACTIVE if spec.manipulable else PASSIVE

    order = topo_order(defs)
    machines: list[_Machine] = []
    for defn in order:
        for values in _candidate_values(defn, assignments, ontology):
            machines.append(_Machine(defn, values, defs_by_name, thresholds))

    registry = _Registry()
    ctx = EvalContext(trace, scene, ontology, thresholds, vector_comovement=vector_comovement)
    for _ in range(len(trace.frames)):
        ctx.advance()
        for machine in machines:
            machine.step(ctx, registry)
        if on_frame is not None:
            on_frame(ctx)
    for machine in machines:
        machine.flush(ctx, registry)

    instances = tuple(sorted(registry.emitted, key=lambda i: i.sort_key()))
    return Timeline(instances, trace_id=trace_id, thresholds=thresholds)
