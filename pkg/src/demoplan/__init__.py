"""Trace-driven action recognition over 2D hand/object observations.

The pipeline: parse an observation trace, analyze the initial scene
against an affordance knowledge base, evaluate spatial-relation
constraints per frame, match action definitions into a timeline, and
expand the timeline into an abstract robot command plan. A synthetic
generator produces labeled demonstration traces for evaluation.
"""

from .actions import (
    ActionDefinition,
    builtin_definitions,
    builtin_text,
    parse_actions,
    serialize_actions,
)
from .constraints import Binding, Constraint, EvalContext, Thresholds, bind_hand, truth_rows
from .errors import (
    ActionSyntaxError,
    DemoplanError,
    InputError,
    MatchError,
    OntologyError,
    PlanError,
    ScenarioError,
    SceneError,
    SimulationError,
    TraceError,
    UnknownAffordanceError,
    UnknownClassError,
)
from .ontology import (
    DEFAULT_ONTOLOGY_TEXT,
    ObjectSpec,
    Ontology,
    default_ontology,
    load_ontology,
    load_ontology_file,
    serialize_ontology,
)
from .planner import (
    Command,
    CommandPlan,
    Verb,
    WorldState,
    check_goal,
    lint_plan,
    load_plan,
    parse_plan,
    plan,
    save_plan,
    serialize_plan,
    simulate_plan,
)
from .recognizer import match
from .report import Outcome, corpus_tables, interval_overlap, precision_recall, score
from .scene import SceneState, analyze_initial
from .synthgen import (
    GenJob,
    NoiseModel,
    Scenario,
    batch,
    builtin_templates,
    generate,
    jobs_from_grid,
    load_manifest,
    parse_scenarios,
    regenerate,
)
from .timeline import (
    ActionInstance,
    Bindings,
    Timeline,
    load_timeline,
    parse_timeline,
    save_timeline,
    serialize_timeline,
)
from .trace import (
    BBox,
    Detection,
    Frame,
    HandSet,
    Point2,
    Trace,
    centroid,
    extent_vector,
    load_trace,
    parse_trace,
    save_trace,
    serialize_trace,
)

__version__ = "0.1.0"
