"""Knowledge base of object classes and the actions they afford.

Documents are YAML with exactly two top-level lists:

    affordances: [pick, place, pour, accept_pouring]
    objects:
      - class: cup
        manipulable: true
        affordances: [pick, place, pour]
      - class: bowl
        manipulable: false
        affordances: [accept_pouring]

Classes marked manipulable are candidates for one-handed manipulation
("active" objects); everything else is "passive" scenery that actions may
target. A non-manipulable class may not declare an affordance from the
motion-requiring list (by default pick, place, pour) - that inconsistency
is rejected at load time.

Affordance names are open vocabulary; the four above ship as defaults.
An Ontology is immutable after loading and safe for concurrent reads.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass

import yaml

from .errors import OntologyError, UnknownAffordanceError, UnknownClassError

REQUIRES_MANIPULATION_DEFAULT = frozenset({"pick", "place", "pour"})

_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


def _check_ident(name, what: str) -> str:
    if not isinstance(name, str) or not _IDENT_RE.match(name):
        raise OntologyError(
            f"{what} {name!r} is not a valid identifier (lower-case, [a-z0-9_])"
        )
    return name


@dataclass(frozen=True)
class ObjectSpec:
    class_name: str
    manipulable: bool
    affordances: frozenset[str]


@dataclass(frozen=True, eq=True)
class Ontology:
    affordance_names: tuple[str, ...]
    objects: dict[str, ObjectSpec]

    def __len__(self) -> int:
        return len(self.objects)

    def spec_for(self, class_name: str) -> ObjectSpec:
        try:
            return self.objects[class_name]
        except KeyError:
            raise UnknownClassError(f"unknown object class {class_name!r}") from None

    def is_manipulable(self, class_name: str) -> bool:
        """True when the class can be manipulated with one hand."""
        return self.spec_for(class_name).manipulable

    def affordances_of(self, class_name: str) -> frozenset[str]:
        """All affordances the class admits (a subset of the registry)."""
        return self.spec_for(class_name).affordances

    def has_affordance(self, class_name: str, affordance: str) -> bool:
        """True when the class admits the (registered) affordance."""
        if affordance not in self.affordance_names:
            raise UnknownAffordanceError(f"unknown affordance {affordance!r}")
        return affordance in self.spec_for(class_name).affordances


def load_ontology(source, *, requires_manipulation=REQUIRES_MANIPULATION_DEFAULT) -> Ontology:
    """Load and validate an ontology document.

    Raises OntologyError naming the offending entry on duplicate classes,
    references to undeclared affordances, unknown keys, or a
    non-manipulable class declaring a motion-requiring affordance.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise OntologyError(f"invalid ontology document: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise OntologyError("ontology document must be a mapping")
    unknown = set(doc) - {"affordances", "objects"}
    if unknown:
        raise OntologyError(f"unknown top-level keys {sorted(unknown)}")

    raw_affordances = doc.get("affordances") or []
    if not isinstance(raw_affordances, list):
        raise OntologyError("'affordances' must be a list")
    affordances: list[str] = []
    for name in raw_affordances:
        _check_ident(name, "affordance")
        if name in affordances:
            raise OntologyError(f"duplicate affordance {name!r}")
        affordances.append(name)
    registry = frozenset(affordances)

    raw_objects = doc.get("objects") or []
    if not isinstance(raw_objects, list):
        raise OntologyError("'objects' must be a list")
    objects: dict[str, ObjectSpec] = {}
    for entry in raw_objects:
        if not isinstance(entry, dict):
            raise OntologyError("object entry must be a mapping")
        unknown = set(entry) - {"class", "manipulable", "affordances"}
        if unknown:
            raise OntologyError(f"unknown object keys {sorted(unknown)}")
        name = _check_ident(entry.get("class"), "object class")
        if name in objects:
            raise OntologyError(f"duplicate object class {name!r}")
        manipulable = entry.get("manipulable")
        if not isinstance(manipulable, bool):
            raise OntologyError(f"object {name!r}: 'manipulable' must be true or false")
        raw = entry.get("affordances") or []
        if not isinstance(raw, list):
            raise OntologyError(f"object {name!r}: 'affordances' must be a list")
        names: list[str] = []
        for a in raw:
            _check_ident(a, "affordance")
            if a not in registry:
                raise OntologyError(f"object {name!r} references undeclared affordance {a!r}")
            if a in names:
                raise OntologyError(f"object {name!r} repeats affordance {a!r}")
            names.append(a)
        if not manipulable:
            bad = sorted(set(names) & set(requires_manipulation))
            if bad:
                raise OntologyError(
                    f"object {name!r} is not manipulable but declares {bad}"
                )
        objects[name] = ObjectSpec(name, manipulable, frozenset(names))

    return Ontology(affordance_names=tuple(affordances), objects=objects)


def serialize_ontology(ontology: Ontology) -> str:
    """Canonical YAML form; load(serialize(o)) equals o."""
    doc = {
        "affordances": list(ontology.affordance_names),
        "objects": [
            {
                "class": spec.class_name,
                "manipulable": spec.manipulable,
                # keep registry order for a stable, diffable dump
                "affordances": [a for a in ontology.affordance_names if a in spec.affordances],
            }
            for spec in ontology.objects.values()
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_ontology_file(path, **kwargs) -> Ontology:
    with open(path, "r", encoding="utf-8") as fh:
        return load_ontology(fh, **kwargs)


DEFAULT_ONTOLOGY_TEXT = """\
# Default kitchen knowledge base.
affordances: [pick, place, pour, accept_pouring]
objects:
  - class: blue_cup
    manipulable: true
    affordances: [pick, place, pour]
  - class: yellow_cup
    manipulable: true
    affordances: [pick, place, pour]
  - class: mug
    manipulable: true
    affordances: [pick, place, pour]
  - class: watering_can
    manipulable: true
    affordances: [pick, place, pour]
  - class: spaghetti
    manipulable: true
    affordances: [pick, pour]
  - class: bowl
    manipulable: false
    affordances: [accept_pouring]
  - class: pot
    manipulable: false
    affordances: [accept_pouring]
  - class: plant
    manipulable: false
    affordances: [accept_pouring]
"""


def default_ontology() -> Ontology:
    return load_ontology(DEFAULT_ONTOLOGY_TEXT)
