"""Recognition scoring and the three evaluation tables.

A ground-truth instance counts as recognized when some emitted instance
has the same action, the same bindings, and interval overlap (inclusive
intersection over union) of at least the configured minimum. Matching is
one-to-one; anything emitted that matches no label is spurious.

Three table shapes summarize a corpus:

  * activity table: action rows by activity columns;
  * object table:   active-object rows by action columns;
  * constraint table: active-object rows by constraint columns, where a
    cell aggregates the instances whose definition exercises that
    constraint and '---' marks constraints never exercised for that
    object (a scenario that never rests its object on the table exercises
    no table-membership check).

All cells are success rates in [0, 1]; tables are derivable from stored
timelines plus labels alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import ActionDefinition, builtin_definitions
from .constraints import Constraint
from .timeline import ActionInstance, Timeline

PRIMITIVE_ACTIONS = ("Pick", "Pour", "Place")
CONSTRAINT_COLUMNS = ("C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12")


def interval_overlap(a: tuple[int, int], b: tuple[int, int]) -> float:
    """Inclusive intersection over union of two frame intervals."""
    inter = min(a[1], b[1]) - max(a[0], b[0]) + 1
    if inter <= 0:
        return 0.0
    union = (a[1] - a[0] + 1) + (b[1] - b[0] + 1) - inter
    return inter / union


@dataclass
class Outcome:
    """Scored recognition of one trace against its labels."""

    entry_id: str
    activity: str
    matched: list[tuple[ActionInstance, ActionInstance]] = field(default_factory=list)
    missed: list[ActionInstance] = field(default_factory=list)
    spurious: list[ActionInstance] = field(default_factory=list)

    @property
    def total_truth(self) -> int:
        return len(self.matched) + len(self.missed)

    @property
    def total_recognized(self) -> int:
        return len(self.matched) + len(self.spurious)


def score(gt: Timeline, recognized: Timeline, *, min_overlap: float = 0.5,
          entry_id: str = "trace", activity: str = "demo") -> Outcome:
    out = Outcome(entry_id=entry_id, activity=activity)
    available = list(recognized.instances)
    for truth in gt.instances:
        hit = None
        for cand in available:
            if cand.action != truth.action:
                continue
            if cand.bindings != truth.bindings:
                continue
            if interval_overlap((truth.start, truth.end), (cand.start, cand.end)) < min_overlap:
                continue
            hit = cand
            break
        if hit is None:
            out.missed.append(truth)
        else:
            available.remove(hit)
            out.matched.append((truth, hit))
    out.spurious.extend(available)
    return out


def precision_recall(outcomes: list[Outcome]) -> tuple[float, float]:
    matched = sum(len(o.matched) for o in outcomes)
    truth = sum(o.total_truth for o in outcomes)
    recognized = sum(o.total_recognized for o in outcomes)
    precision = matched / recognized if recognized else 1.0
    recall = matched / truth if truth else 1.0
    return precision, recall


def recall_for_action(outcomes: list[Outcome], action: str) -> float | None:
    hits = sum(1 for o in outcomes for t, _ in o.matched if t.action == action)
    total = hits + sum(1 for o in outcomes for t in o.missed if t.action == action)
    return hits / total if total else None


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


@dataclass
class Table:
    title: str
    row_header: str
    columns: tuple[str, ...]
    rows: list[tuple[str, list[float | None]]]

    def cell(self, row: str, column: str) -> float | None:
        j = self.columns.index(column)
        for name, values in self.rows:
            if name == row:
                return values[j]
        raise KeyError(row)

    def render_text(self) -> str:
        headers = [self.row_header, *self.columns]
        body = [
            [name, *["---" if v is None else f"{v:.3f}" for v in values]]
            for name, values in self.rows
        ]
        widths = [max(len(str(r[i])) for r in [headers, *body]) for i in range(len(headers))]
        lines = [self.title]
        lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
        lines.append("  ".join("-" * w for w in widths))
        for r in body:
            lines.append("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
        return "\n".join(lines)

    def render_csv(self) -> str:
        lines = [",".join([self.row_header, *self.columns])]
        for name, values in self.rows:
            cells = ["" if v is None else f"{v:.6f}" for v in values]
            lines.append(",".join([name, *cells]))
        return "\n".join(lines)


def _rate(hits: int, total: int) -> float | None:
    return None if total == 0 else hits / total


def activity_table(outcomes: list[Outcome]) -> Table:
    activities = tuple(sorted({o.activity for o in outcomes}))
    rows = []
    for action in PRIMITIVE_ACTIONS:
        values: list[float | None] = []
        for activity in activities:
            hits = total = 0
            for o in outcomes:
                if o.activity != activity:
                    continue
                hits += sum(1 for t, _ in o.matched if t.action == action)
                total += sum(1 for t, _ in o.matched if t.action == action)
                total += sum(1 for t in o.missed if t.action == action)
            values.append(_rate(hits, total))
        rows.append((action, values))
    return Table("Success rate by activity", "action", activities, rows)


def _truth_instances(outcomes: list[Outcome]):
    for o in outcomes:
        for t, _ in o.matched:
            yield t, True
        for t in o.missed:
            yield t, False


def object_table(outcomes: list[Outcome]) -> Table:
    objects = tuple(sorted({
        t.bindings.active for t, _ in _truth_instances(outcomes)
        if t.action in PRIMITIVE_ACTIONS and t.bindings.active
    }))
    rows = []
    for obj in objects:
        values: list[float | None] = []
        for action in PRIMITIVE_ACTIONS:
            hits = total = 0
            for t, ok in _truth_instances(outcomes):
                if t.action == action and t.bindings.active == obj:
                    total += 1
                    hits += 1 if ok else 0
            values.append(_rate(hits, total))
        rows.append((obj, values))
    return Table("Success rate by active object", "object", PRIMITIVE_ACTIONS, rows)


def constraint_table(outcomes: list[Outcome],
                     definitions: tuple[ActionDefinition, ...] | None = None) -> Table:
    defs = definitions if definitions is not None else builtin_definitions()
    by_name = {d.name: d for d in defs}
    exercised: dict[str, frozenset[str]] = {
        name: frozenset(c.value for c in d.constraint_ids(by_name))
        for name, d in by_name.items()
    }
    objects = tuple(sorted({
        t.bindings.active for t, _ in _truth_instances(outcomes)
        if t.action in PRIMITIVE_ACTIONS and t.bindings.active
    }))
    rows = []
    for obj in objects:
        values: list[float | None] = []
        for col in CONSTRAINT_COLUMNS:
            hits = total = 0
            for t, ok in _truth_instances(outcomes):
                if t.action not in PRIMITIVE_ACTIONS or t.bindings.active != obj:
                    continue
                if col not in exercised.get(t.action, frozenset()):
                    continue
                total += 1
                hits += 1 if ok else 0
            values.append(_rate(hits, total))
        rows.append((obj, values))
    return Table("Success rate by constraint", "object", CONSTRAINT_COLUMNS, rows)


def corpus_tables(outcomes: list[Outcome],
                  definitions: tuple[ActionDefinition, ...] | None = None) -> tuple[Table, Table, Table]:
    return (
        activity_table(outcomes),
        object_table(outcomes),
        constraint_table(outcomes, definitions),
    )
