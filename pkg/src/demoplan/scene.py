"""Initial scene analysis: who is active, where everything started.

The opening frames of a demonstration show a static scene. Over that
window we classify every detected class as active (manipulable) or
passive, record per-class median centroids as starting positions, the
per-corner median table region, and the median box extents of active
objects (their resting aspect, kept as a rotation baseline).

Medians are taken per coordinate, which suppresses single-frame detector
outliers. The result is a pure function of the window's frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import median

from .errors import SceneError
from .ontology import Ontology
from .trace import BBox, Point2, Trace

ACTIVE = "active"
PASSIVE = "passive"


@dataclass(frozen=True)
class SceneState:
    assignments: dict[str, str]
    initial_centroids: dict[str, Point2]
    initial_extents: dict[str, tuple[float, float]]
    table: BBox
    init_span: tuple[int, int]


def analyze_initial(trace: Trace, ontology: Ontology, init_window: int = 10) -> SceneState:
    """Analyze the first ``init_window`` frames of a trace.

    Raises SceneError when the window is empty, the trace is shorter than
    the window, or no frame in the window carries a table region. Unknown
    object classes propagate as UnknownClassError naming the class.
    """
    if init_window < 1:
        raise SceneError("init window must be at least 1 frame")
    if len(trace.frames) < init_window:
        raise SceneError(
            f"trace has {len(trace.frames)} frames, fewer than the init window of {init_window}"
        )
    window = trace.frames[:init_window]

    xs: dict[str, list[float]] = {}
    ys: dict[str, list[float]] = {}
    ws: dict[str, list[float]] = {}
    hs: dict[str, list[float]] = {}
    tables: list[BBox] = []
    for frame in window:
        for det in frame.detections:
            c = det.bbox.center
            xs.setdefault(det.class_name, []).append(c.x)
            ys.setdefault(det.class_name, []).append(c.y)
            w, h = det.bbox.extent
            ws.setdefault(det.class_name, []).append(w)
            hs.setdefault(det.class_name, []).append(h)
        if frame.table is not None:
            tables.append(frame.table)
    if not tables:
        raise SceneError("no table region observed in the init window")

    assignments: dict[str, str] = {}
    centroids: dict[str, Point2] = {}
    extents: dict[str, tuple[float, float]] = {}
    for name in xs:
        manipulable = ontology.is_manipulable(name)
        assignments[name] = ACTIVE if manipulable else PASSIVE
        centroids[name] = Point2(median(xs[name]), median(ys[name]))
        if manipulable:
            extents[name] = (median(ws[name]), median(hs[name]))

    table = BBox(
        median(t.x_min for t in tables),
        median(t.y_min for t in tables),
        median(t.x_max for t in tables),
        median(t.y_max for t in tables),
    )
    return SceneState(
        assignments=assignments,
        initial_centroids=centroids,
        initial_extents=extents,
        table=table,
        init_span=(window[0].index, window[-1].index),
    )
