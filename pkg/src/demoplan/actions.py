"""Action definitions and their small rule DSL.

An action names its roles, gates candidates with static knowledge-base
constraints, and then requires an ordered sequence of phases, each a
conjunction of per-frame constraints that must hold for a duration:

    action Pick(obj: active, grip: hand) {
      static: C1(obj) & C3(obj, pick);
      phase: hold(C5(obj, grip), th_n);
      phase: hold(C9(obj, grip), th_n);
    }

Clauses:
  static:  conjunction of C1..C4 terms gating role candidates.
  after:   a prerequisite sub-action that must have completed first; it
           does not become part of the recognized interval (a place needs
           an earlier pick of the same object and hand).
  embed:   a sub-action absorbed as a child; the recognized interval
           starts at the child's start (a pour embeds its pick). A
           definition with only embed clauses and no phases is a pure
           composition, recognized when its children complete in order.
  phase:   conjunction of C5..C12 terms, optionally negated with '!'.
           One 'hold(Ck(...), n)' term sets the phase duration; 'th_n'
           stands for the configured hold window, which is also the
           default when no hold term is present. A held C5 is exactly the
           sustained-contact check C7, a held C6 the separation check C8,
           so those two ids never appear literally in definitions.

Role kinds are 'active', 'passive' and 'hand'; at most one role per kind.
Sub-action references pass parent role names positionally and must be
acyclic. Parsed definitions are immutable and reusable across traces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .constraints import (
    Constraint,
    PER_FRAME_CONSTRAINTS,
    REQUIRED_ROLES,
    STATIC_CONSTRAINTS,
    WINDOWED_CONSTRAINTS,
)
from .errors import ActionSyntaxError

ROLE_KINDS = ("active", "passive", "hand")

_KEYWORDS = {"action", "static", "after", "embed", "phase", "hold", "th_n"}


@dataclass(frozen=True)
class Role:
    name: str
    kind: str


@dataclass(frozen=True)
class StaticCheck:
    constraint: Constraint
    role: str
    affordance: str | None = None


@dataclass(frozen=True)
class PhaseTerm:
    constraint: Constraint
    roles: tuple[str, ...]
    negated: bool = False


@dataclass(frozen=True)
class Phase:
    terms: tuple[PhaseTerm, ...]
    duration: int | None = None  # None: use the configured hold window


@dataclass(frozen=True)
class SubActionRef:
    action: str
    role_map: tuple[str, ...]  # parent role names, positional over the child's roles


@dataclass(frozen=True)
class ActionDefinition:
    name: str
    roles: tuple[Role, ...]
    static: tuple[StaticCheck, ...] = ()
    requires: tuple[SubActionRef, ...] = ()
    embeds: tuple[SubActionRef, ...] = ()
    phases: tuple[Phase, ...] = ()

    def role(self, name: str) -> Role:
        for r in self.roles:
            if r.name == name:
                return r
        raise KeyError(name)

    def role_of_kind(self, kind: str) -> Role | None:
        for r in self.roles:
            if r.kind == kind:
                return r
        return None

    @property
    def is_composite(self) -> bool:
        return not self.phases and bool(self.embeds)

    def constraint_ids(self, by_name: dict[str, "ActionDefinition"]) -> frozenset[Constraint]:
        """Dynamic constraints this action exercises, including via embeds.

        A held proximity/separation term also exercises the corresponding
        sustained check (C7 for C5, C8 for C6).
        """
        out: set[Constraint] = set()
        for phase in self.phases:
            for term in phase.terms:
                out.add(term.constraint)
                if not term.negated:
                    if term.constraint is Constraint.HAND_NEAR:
                        out.add(Constraint.NEAR_SUSTAINED)
                    elif term.constraint is Constraint.HAND_FAR:
                        out.add(Constraint.FAR_SUSTAINED)
        for ref in self.embeds:
            out |= by_name[ref.action].constraint_ids(by_name)
        return frozenset(out)


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<nl>\n)"
    r"|(?P<comment>#[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<int>\d+)"
    r"|(?P<sym>[(){}:;,&!])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | int | sym | eof
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ActionSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        raw = m.group()
        if kind == "nl":
            line += 1
            col = 1
        else:
            if kind in ("ident", "int", "sym"):
                tokens.append(_Token(kind, raw, line, col))
            col += len(raw)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self._tokens = _tokenize(text)
        self._i = 0

    def _peek(self) -> _Token:
        return self._tokens[self._i]

    def _next(self) -> _Token:
        tok = self._tokens[self._i]
        self._i += 1
        return tok

    def _fail(self, message: str, tok: _Token | None = None):
        tok = tok or self._peek()
        raise ActionSyntaxError(message, tok.line, tok.column)

    def _expect_sym(self, sym: str) -> _Token:
        tok = self._next()
        if tok.kind != "sym" or tok.text != sym:
            self._fail(f"expected {sym!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def _expect_ident(self, what: str = "identifier") -> _Token:
        tok = self._next()
        if tok.kind != "ident":
            self._fail(f"expected {what}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def _at_sym(self, sym: str) -> bool:
        tok = self._peek()
        return tok.kind == "sym" and tok.text == sym

    # grammar ----------------------------------------------------------

    def parse_file(self) -> tuple[ActionDefinition, ...]:
        defs: list[ActionDefinition] = []
        while self._peek().kind != "eof":
            tok = self._expect_ident("'action'")
            if tok.text != "action":
                self._fail(f"expected 'action', found {tok.text!r}", tok)
            defs.append(self._parse_action())
        return tuple(defs)

    def _parse_action(self) -> ActionDefinition:
        name_tok = self._expect_ident("action name")
        if name_tok.text in _KEYWORDS:
            self._fail(f"{name_tok.text!r} is a reserved word", name_tok)
        roles = self._parse_roles()
        role_names = {r.name for r in roles}
        kinds_seen: set[str] = set()
        for r in roles:
            if r.kind in kinds_seen:
                self._fail(f"action {name_tok.text!r} declares two {r.kind!r} roles", name_tok)
            kinds_seen.add(r.kind)

        self._expect_sym("{")
        static: list[StaticCheck] = []
        requires: list[SubActionRef] = []
        embeds: list[SubActionRef] = []
        phases: list[Phase] = []
        while not self._at_sym("}"):
            kw = self._expect_ident("clause keyword")
            self._expect_sym(":")
            if kw.text == "static":
                static.extend(self._parse_static_terms(roles, role_names))
            elif kw.text == "after":
                requires.append(self._parse_subref(role_names))
            elif kw.text == "embed":
                embeds.append(self._parse_subref(role_names))
            elif kw.text == "phase":
                phases.append(self._parse_phase(roles, role_names))
            else:
                self._fail(f"unknown clause {kw.text!r}", kw)
            self._expect_sym(";")
        self._expect_sym("}")

        if not phases and not embeds:
            self._fail(f"action {name_tok.text!r} has neither phases nor embedded sub-actions", name_tok)
        return ActionDefinition(
            name=name_tok.text,
            roles=roles,
            static=tuple(static),
            requires=tuple(requires),
            embeds=tuple(embeds),
            phases=tuple(phases),
        )

    def _parse_roles(self) -> tuple[Role, ...]:
        self._expect_sym("(")
        roles: list[Role] = []
        if not self._at_sym(")"):
            while True:
                name = self._expect_ident("role name")
                if name.text in _KEYWORDS:
                    self._fail(f"{name.text!r} is a reserved word", name)
                self._expect_sym(":")
                kind = self._expect_ident("role kind")
                if kind.text not in ROLE_KINDS:
                    self._fail(f"role kind must be one of {ROLE_KINDS}, found {kind.text!r}", kind)
                if any(r.name == name.text for r in roles):
                    self._fail(f"duplicate role name {name.text!r}", name)
                roles.append(Role(name.text, kind.text))
                if self._at_sym(","):
                    self._next()
                    continue
                break
        self._expect_sym(")")
        return tuple(roles)

    def _parse_constraint_id(self) -> tuple[Constraint, _Token]:
        tok = self._expect_ident("constraint id")
        if not re.fullmatch(r"C\d+", tok.text):
            self._fail(f"expected a constraint id like C5, found {tok.text!r}", tok)
        try:
            constraint = Constraint(tok.text)
        except ValueError:
            self._fail(f"unknown constraint {tok.text!r}", tok)
        if constraint in WINDOWED_CONSTRAINTS:
            base = "C5" if constraint is Constraint.NEAR_SUSTAINED else "C6"
            self._fail(
                f"{tok.text} is expressed as hold({base}(...), n) in definitions", tok
            )
        return constraint, tok

    def _parse_args(self) -> tuple[list[_Token], _Token]:
        open_tok = self._expect_sym("(")
        args: list[_Token] = []
        if not self._at_sym(")"):
            while True:
                args.append(self._expect_ident("argument"))
                if self._at_sym(","):
                    self._next()
                    continue
                break
        self._expect_sym(")")
        return args, open_tok

    def _resolve_term_roles(self, constraint: Constraint, args: list[_Token],
                            roles: tuple[Role, ...], role_names: set[str],
                            *, allow_affordance: bool) -> tuple[tuple[str, ...], str | None]:
        wanted = REQUIRED_ROLES[constraint]
        role_slots = [w for w in wanted if w != "affordance"]
        takes_affordance = "affordance" in wanted
        expected = len(role_slots) + (1 if takes_affordance else 0)
        if len(args) != expected:
            self._fail(
                f"{constraint.value} takes {expected} argument(s), got {len(args)}",
                args[0] if args else None,
            )
        names: list[str] = []
        for slot_kind, tok in zip(role_slots, args):
            if tok.text not in role_names:
                self._fail(f"unknown role {tok.text!r}", tok)
            role = next(r for r in roles if r.name == tok.text)
            if role.kind != slot_kind:
                self._fail(
                    f"{constraint.value} wants a {slot_kind} role, {tok.text!r} is {role.kind}", tok
                )
            names.append(tok.text)
        affordance = None
        if takes_affordance:
            if not allow_affordance:
                self._fail(f"{constraint.value} is not allowed here", args[0])
            affordance = args[-1].text
        return tuple(names), affordance

    def _parse_static_terms(self, roles, role_names) -> list[StaticCheck]:
        checks: list[StaticCheck] = []
        while True:
            constraint, ctok = self._parse_constraint_id()
            if constraint not in STATIC_CONSTRAINTS:
                self._fail(f"{ctok.text} is not a static constraint", ctok)
            args, _ = self._parse_args()
            names, affordance = self._resolve_term_roles(
                constraint, args, roles, role_names, allow_affordance=True
            )
            checks.append(StaticCheck(constraint, names[0], affordance))
            if self._at_sym("&"):
                self._next()
                continue
            return checks

    def _parse_subref(self, role_names: set[str]) -> SubActionRef:
        name = self._expect_ident("sub-action name")
        args, _ = self._parse_args()
        for tok in args:
            if tok.text not in role_names:
                self._fail(f"unknown role {tok.text!r}", tok)
        return SubActionRef(name.text, tuple(t.text for t in args))

    def _parse_phase(self, roles, role_names) -> Phase:
        terms: list[PhaseTerm] = []
        duration: int | None = None
        saw_hold = False
        while True:
            tok = self._peek()
            negated = False
            if tok.kind == "sym" and tok.text == "!":
                self._next()
                negated = True
                tok = self._peek()
            if tok.kind == "ident" and tok.text == "hold":
                if negated:
                    self._fail("hold(...) cannot be negated", tok)
                if saw_hold:
                    self._fail("a phase may contain at most one hold(...) term", tok)
                saw_hold = True
                self._next()
                self._expect_sym("(")
                constraint, ctok = self._parse_constraint_id()
                self._check_phase_constraint(constraint, ctok)
                args, _ = self._parse_args()
                names, _ = self._resolve_term_roles(
                    constraint, args, roles, role_names, allow_affordance=False
                )
                self._expect_sym(",")
                duration = self._parse_duration()
                self._expect_sym(")")
                terms.append(PhaseTerm(constraint, names, False))
            else:
                constraint, ctok = self._parse_constraint_id()
                self._check_phase_constraint(constraint, ctok, negated=negated)
                args, _ = self._parse_args()
                names, _ = self._resolve_term_roles(
                    constraint, args, roles, role_names, allow_affordance=False
                )
                terms.append(PhaseTerm(constraint, names, negated))
            if self._at_sym("&"):
                self._next()
                continue
            break
        return Phase(tuple(terms), duration)

    def _check_phase_constraint(self, constraint: Constraint, tok: _Token, *, negated=False):
        if constraint not in PER_FRAME_CONSTRAINTS:
            self._fail(f"{tok.text} cannot appear in a phase", tok)

    def _parse_duration(self) -> int | None:
        tok = self._next()
        if tok.kind == "ident" and tok.text == "th_n":
            return None
        if tok.kind == "int":
            value = int(tok.text)
            if value < 1:
                self._fail("hold duration must be at least 1", tok)
            return value
        self._fail(f"expected a frame count or th_n, found {tok.text!r}", tok)


def _validate_cross_references(defs: tuple[ActionDefinition, ...]) -> None:
    by_name: dict[str, ActionDefinition] = {}
    for d in defs:
        if d.name in by_name:
            raise ActionSyntaxError(f"duplicate action name {d.name!r}")
        by_name[d.name] = d

    for d in defs:
        for ref in d.requires + d.embeds:
            child = by_name.get(ref.action)
            if child is None:
                raise ActionSyntaxError(f"action {d.name!r} references unknown action {ref.action!r}")
            if len(ref.role_map) != len(child.roles):
                raise ActionSyntaxError(
                    f"action {d.name!r}: {ref.action!r} takes {len(child.roles)} role(s), got {len(ref.role_map)}"
                )
            for parent_role_name, child_role in zip(ref.role_map, child.roles):
                parent_role = d.role(parent_role_name)
                if parent_role.kind != child_role.kind:
                    raise ActionSyntaxError(
                        f"action {d.name!r}: role {parent_role_name!r} is {parent_role.kind}, "
                        f"but {ref.action}.{child_role.name} wants {child_role.kind}"
                    )

    # cycle detection over both reference kinds
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in by_name}

    def visit(name: str, path: list[str]):
        color[name] = GREY
        for ref in by_name[name].requires + by_name[name].embeds:
            if color[ref.action] == GREY:
                cycle = " -> ".join(path + [name, ref.action])
                raise ActionSyntaxError(f"cyclic sub-action reference: {cycle}")
            if color[ref.action] == WHITE:
                visit(ref.action, path + [name])
        color[name] = BLACK

    for name in by_name:
        if color[name] == WHITE:
            visit(name, [])


def parse_actions(source) -> tuple[ActionDefinition, ...]:
    """Parse an action DSL document into validated definitions."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    defs = _Parser(text).parse_file()
    _validate_cross_references(defs)
    return defs


def topo_order(defs: tuple[ActionDefinition, ...]) -> tuple[ActionDefinition, ...]:
    """Definitions ordered so every referenced action precedes its parents."""
    by_name = {d.name: d for d in defs}
    out: list[ActionDefinition] = []
    done: set[str] = set()

    def visit(d: ActionDefinition):
        if d.name in done:
            return
        for ref in d.requires + d.embeds:
            visit(by_name[ref.action])
        if d.name not in done:
            done.add(d.name)
            out.append(d)

    for d in defs:
        visit(d)
    return tuple(out)


def serialize_actions(defs: tuple[ActionDefinition, ...]) -> str:
    """Canonical DSL text; parse(serialize(defs)) equals defs."""
    chunks: list[str] = []
    for d in defs:
        roles = ", ".join(f"{r.name}: {r.kind}" for r in d.roles)
        lines = [f"action {d.name}({roles}) {{"]
        if d.static:
            terms = " & ".join(
                f"{c.constraint.value}({c.role}, {c.affordance})" if c.affordance
                else f"{c.constraint.value}({c.role})"
                for c in d.static
            )
            lines.append(f"  static: {terms};")
        for ref in d.requires:
            lines.append(f"  after: {ref.action}({', '.join(ref.role_map)});")
        for ref in d.embeds:
            lines.append(f"  embed: {ref.action}({', '.join(ref.role_map)});")
        for phase in d.phases:
            rendered = []
            hold_done = False
            for term in phase.terms:
                call = f"{term.constraint.value}({', '.join(term.roles)})"
                if not hold_done and not term.negated and phase.duration is not None:
                    rendered.append(f"hold({call}, {phase.duration})")
                    hold_done = True
                elif not hold_done and not term.negated and phase.duration is None and term is phase.terms[0]:
                    rendered.append(f"hold({call}, th_n)")
                    hold_done = True
                else:
                    rendered.append(f"!{call}" if term.negated else call)
            lines.append(f"  phase: {' & '.join(rendered)};")
        lines.append("}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


BUILTIN_ACTIONS_TEXT = """\
# Built-in action library.
#
# A pick is sustained hand contact followed by sustained co-movement; a
# place is sustained separation from a stationary object resting on the
# table, gated on an earlier pick of the same object and hand; a pour is
# a pick followed by sustained rotation of the carried object while it is
# held over the receiving object and still co-moving with the hand; the
# watering pattern is a pour followed by a place of the same object.

action Pick(obj: active, grip: hand) {
  static: C1(obj) & C3(obj, pick);
  phase: hold(C5(obj, grip), th_n);
  phase: hold(C9(obj, grip), th_n);
}

action Place(obj: active, grip: hand) {
  static: C1(obj) & C3(obj, place);
  after: Pick(obj, grip);
  phase: hold(C6(obj, grip), th_n) & !C9(obj, grip) & C11(obj);
}

action Pour(src: active, grip: hand, dst: passive) {
  static: C2(dst) & C3(src, pour) & C4(dst, accept_pouring);
  embed: Pick(src, grip);
  phase: hold(C12(src, dst), th_n) & C10(src) & C9(src, grip);
}

action WateringPlant(src: active, grip: hand, dst: passive) {
  embed: Pour(src, grip, dst);
  embed: Place(src, grip);
}
"""

# Variant with the pour phase reduced to bare co-movement: the over-target
# and rotation cues are dropped, which recognizes pours earlier but far
# less precisely. Off by default.
BUILTIN_ACTIONS_STRICT_TEXT = BUILTIN_ACTIONS_TEXT.replace(
    "  phase: hold(C12(src, dst), th_n) & C10(src) & C9(src, grip);",
    "  phase: hold(C9(src, grip), th_n);",
)


def builtin_text(strict_pour: bool = False) -> str:
    return BUILTIN_ACTIONS_STRICT_TEXT if strict_pour else BUILTIN_ACTIONS_TEXT


def builtin_definitions(strict_pour: bool = False) -> tuple[ActionDefinition, ...]:
    return parse_actions(builtin_text(strict_pour))
