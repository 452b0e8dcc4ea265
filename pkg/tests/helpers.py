"""Shared test scaffolding: tiny hand-built traces and corpus recognition."""

from __future__ import annotations

from demoplan.constraints import Thresholds
from demoplan.errors import InputError
from demoplan.ontology import Ontology, ObjectSpec
from demoplan.recognizer import match
from demoplan.report import Outcome, score
from demoplan.scene import SceneState, analyze_initial
from demoplan.timeline import Timeline, load_timeline
from demoplan.trace import BBox, Detection, Frame, HandSet, Point2, Trace, load_trace

IMAGE = (640, 480)
TABLE = BBox(40, 200, 600, 460)


def mk_frame(index, hand=None, left=None, objs=None, table=TABLE, t=None):
    """One frame from plain tuples; hand/left are (x, y), objs maps class -> bbox tuple."""
    hands = HandSet(
        right=Point2(*hand) if hand is not None else None,
        left=Point2(*left) if left is not None else None,
    )
    detections = tuple(
        Detection(name, BBox(*box)) for name, box in (objs or {}).items()
    )
    return Frame(index=index, hands=hands, detections=detections, table=table, timestamp=t)


def mk_trace(frames, image=IMAGE):
    return Trace(frames=tuple(frames), image_size=image)


def mk_scene(assignments, table=TABLE, centroids=None):
    return SceneState(
        assignments=dict(assignments),
        initial_centroids=dict(centroids or {}),
        initial_extents={},
        table=table,
        init_span=(0, 0),
    )


def mk_ontology(objects, affordances=("pick", "place", "pour", "accept_pouring")):
    """Direct construction, bypassing document validation (test-only)."""
    specs = {
        name: ObjectSpec(name, manipulable, frozenset(affs))
        for name, (manipulable, affs) in objects.items()
    }
    return Ontology(affordance_names=tuple(affordances), objects=specs)


def small_thresholds(**overrides):
    values = dict(hand_distance_px=40.0, hold_frames=3, position_tolerance_px=3.0,
                  rotation_tolerance_rad=0.1, column_tolerance_px=None, coast_frames=1)
    values.update(overrides)
    return Thresholds(**values)


def corpus_outcomes(root, manifest, ontology, definitions=None, min_overlap=0.5,
                    thresholds=None, init_window=10):
    """Recognize every corpus entry and score it against its labels."""
    outcomes: list[Outcome] = []
    for entry in manifest["entries"]:
        gt = load_timeline(root / entry["labels"])
        trace = load_trace(root / entry["trace"])
        th = thresholds or gt.thresholds
        try:
            scene = analyze_initial(trace, ontology, init_window)
            recognized = match(trace, scene, ontology, th, definitions, trace_id=entry["id"])
        except InputError:
            recognized = Timeline((), trace_id=entry["id"], thresholds=th)
        outcomes.append(score(gt, recognized, min_overlap=min_overlap,
                              entry_id=entry["id"], activity=entry["activity"]))
    return outcomes
