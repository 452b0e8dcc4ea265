"""Command-line front door.

Subcommands: recognize (trace -> timeline + plan), report (corpus ->
evaluation tables), gen (templates -> labeled corpus), validate (load and
check input files), actions (dump the built-in action library).

Exit codes: 0 success, 2 invalid user input, 1 internal error. Threshold
flags override a YAML config file (--config or $DEMOPLAN_CONFIG), which
overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .actions import builtin_definitions, builtin_text, parse_actions, serialize_actions
from .constraints import Thresholds, truth_rows
from .errors import DemoplanError, InputError
from .ontology import default_ontology, load_ontology_file
from .planner import lint_plan, plan, save_plan
from .recognizer import match
from .report import corpus_tables, precision_recall, score
from .scene import analyze_initial
from .synthgen import (
    GenJob,
    NoiseModel,
    builtin_templates,
    jobs_from_grid,
    load_manifest,
    parse_scenarios,
    batch,
)
from .timeline import load_timeline, save_timeline
from .trace import load_trace

CONFIG_ENV = "DEMOPLAN_CONFIG"

_THRESHOLD_FLAGS = (
    # (flag, config key / Thresholds field, type)
    ("--th-d", "hand_distance_px", float),
    ("--th-n", "hold_frames", int),
    ("--sigma-pos", "position_tolerance_px", float),
    ("--eps-rot", "rotation_tolerance_rad", float),
    ("--eps-col", "column_tolerance_px", float),
    ("--k-miss", "coast_frames", int),
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file (default: $DEMOPLAN_CONFIG)")
    for flag, key, typ in _THRESHOLD_FLAGS:
        parser.add_argument(flag, dest=key, type=typ, default=None)


def _load_config(args) -> dict:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise InputError(f"invalid config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InputError(f"config {path} must be a mapping")
    unknown = set(doc) - {"thresholds", "modes", "init_window", "min_overlap"}
    if unknown:
        raise InputError(f"config {path}: unknown keys {sorted(unknown)}")
    return doc


def _resolve_thresholds(args, config: dict, image_size) -> Thresholds:
    values = dict(config.get("thresholds") or {})
    for _, key, _typ in _THRESHOLD_FLAGS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = flag_value
    return Thresholds.for_image(image_size, **values)


def _mode(args, config: dict, name: str) -> bool:
    if getattr(args, name, False):
        return True
    return bool((config.get("modes") or {}).get(name, False))


def _load_definitions(args, config: dict):
    if getattr(args, "actions", None):
        with open(args.actions, "r", encoding="utf-8") as fh:
            return parse_actions(fh)
    return builtin_definitions(strict_pour=_mode(args, config, "strict_paper"))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_recognize(args) -> int:
    config = _load_config(args)
    trace = load_trace(args.trace)
    if not trace.frames:
        raise InputError(f"trace {args.trace} is empty")
    ontology = load_ontology_file(args.ontology)
    definitions = _load_definitions(args, config)
    thresholds = _resolve_thresholds(args, config, trace.image_size)
    init_window = args.init_window or int(config.get("init_window", 10))
    scene = analyze_initial(trace, ontology, init_window)

    sink = None
    rows: list[dict] = []
    if args.trace_constraints:
        sink = lambda ctx: rows.extend(truth_rows(ctx))  # noqa: E731

    timeline = match(
        trace, scene, ontology, thresholds, definitions,
        lenient=_mode(args, config, "lenient"),
        vector_comovement=_mode(args, config, "vector_c9"),
        trace_id=Path(args.trace).stem,
        on_frame=sink,
    )
    commands = plan(timeline, ontology, scene)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_timeline(timeline, out_dir / "timeline.jsonl")
    save_plan(commands, out_dir / "plan.jsonl")
    if args.trace_constraints:
        with open(out_dir / "constraints.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, allow_nan=False) + "\n")

    primitives = [i for i in timeline.instances if not i.children]
    print(f"recognized {len(timeline.instances)} instance(s) "
          f"({len(primitives)} primitive) over {len(trace.frames)} frames")
    for inst in timeline.instances:
        b = inst.bindings
        roles = ", ".join(v for v in (b.active, b.hand, b.passive) if v)
        print(f"  {inst.action}({roles}) [{inst.start}, {inst.end}]")
    print(f"plan: {len(commands.commands)} command(s) -> {out_dir / 'plan.jsonl'}")
    for warning in lint_plan(commands):
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    config = _load_config(args)
    manifest = load_manifest(args.corpus)
    if not manifest.get("entries"):
        raise InputError(f"corpus {args.corpus} has no entries")
    root = Path(args.corpus)
    if args.ontology:
        ontology = load_ontology_file(args.ontology)
    elif (root / "ontology.yaml").exists():
        ontology = load_ontology_file(root / "ontology.yaml")
    else:
        ontology = default_ontology()
    definitions = _load_definitions(args, config)
    min_overlap = args.min_overlap if args.min_overlap is not None else float(config.get("min_overlap", 0.5))
    init_window = args.init_window or int(config.get("init_window", 10))

    outcomes = []
    for entry in manifest["entries"]:
        gt = load_timeline(root / entry["labels"])
        trace = load_trace(root / entry["trace"])
        thresholds = gt.thresholds or _resolve_thresholds(args, config, trace.image_size)
        try:
            scene = analyze_initial(trace, ontology, init_window)
            recognized = match(trace, scene, ontology, thresholds, definitions,
                               lenient=_mode(args, config, "lenient"),
                               vector_comovement=_mode(args, config, "vector_c9"),
                               trace_id=entry["id"])
        except InputError:
            from .timeline import Timeline
            recognized = Timeline((), trace_id=entry["id"], thresholds=thresholds)
        outcomes.append(score(gt, recognized, min_overlap=min_overlap,
                              entry_id=entry["id"], activity=entry.get("activity", "demo")))

    tables = corpus_tables(outcomes, definitions)
    precision, recall = precision_recall(outcomes)
    if args.format == "csv":
        print("\n\n".join(t.render_csv() for t in tables))
    else:
        print("\n\n".join(t.render_text() for t in tables))
        print(f"\noverall: precision {precision:.3f}, recall {recall:.3f} "
              f"over {len(outcomes)} trace(s)")
    return 0


def cmd_gen(args) -> int:
    config = _load_config(args)
    if args.templates:
        templates = {}
        for path in args.templates:
            with open(path, "r", encoding="utf-8") as fh:
                templates.update(parse_scenarios(fh))
    else:
        templates = builtin_templates()
    if args.only:
        missing = [n for n in args.only if n not in templates]
        if missing:
            raise InputError(f"unknown template(s) {missing}")
        templates = {n: templates[n] for n in args.only}
    if not templates:
        raise InputError("no scenario templates to generate from")

    noise_models = [
        NoiseModel(centroid_jitter_px=j, dropout_prob=d, grip_offset_px=g, seed=args.noise_seed)
        for d in (args.dropout or [0.0])
        for j in (args.jitter or [0.0])
        for g in (args.grip_offset or [0.0])
    ]
    seeds = range(args.base_seed, args.base_seed + args.seeds)
    jobs = jobs_from_grid(sorted(templates), seeds, noise_models)
    thresholds = None
    values = dict(config.get("thresholds") or {})
    for _, key, _typ in _THRESHOLD_FLAGS:
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if values:
        size = next(iter(templates.values())).image_size
        thresholds = Thresholds.for_image(size, **values)
    manifest = batch(args.out, templates, jobs, thresholds)
    print(f"wrote {len(manifest['entries'])} labeled trace(s) to {args.out}")
    return 0


def cmd_validate(args) -> int:
    checked = 0
    if args.ontology:
        ontology = load_ontology_file(args.ontology)
        print(f"ontology {args.ontology}: {len(ontology)} class(es), "
              f"{len(ontology.affordance_names)} affordance(s)")
        checked += 1
    if args.trace:
        trace = load_trace(args.trace)
        print(f"trace {args.trace}: {len(trace.frames)} frame(s), image {trace.image_size}")
        for warning in trace.lint():
            print(f"warning: {warning}", file=sys.stderr)
        checked += 1
    if args.actions:
        with open(args.actions, "r", encoding="utf-8") as fh:
            defs = parse_actions(fh)
        print(f"actions {args.actions}: {len(defs)} definition(s): "
              + ", ".join(d.name for d in defs))
        checked += 1
    if not checked:
        raise InputError("nothing to validate: pass --ontology, --trace and/or --actions")
    print("ok")
    return 0


def cmd_actions(args) -> int:
    if args.dump:
        print(builtin_text(strict_pour=args.strict_paper), end="")
        return 0
    defs = builtin_definitions(strict_pour=args.strict_paper)
    print(serialize_actions(defs), end="")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demoplan",
        description="Recognize tabletop actions from 2D observation traces and plan robot commands.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recognize", help="recognize one trace and emit timeline + plan")
    p.add_argument("--trace", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--actions", help="action DSL file (default: built-in library)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--init-window", type=int, default=None)
    p.add_argument("--strict-paper", action="store_true", dest="strict_paper")
    p.add_argument("--vector-c9", action="store_true", dest="vector_c9")
    p.add_argument("--lenient-scene", action="store_true", dest="lenient")
    p.add_argument("--trace-constraints", action="store_true",
                   help="also dump the per-frame constraint truth stream")
    _add_common(p)
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("report", help="evaluate a labeled corpus and print the three tables")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ontology")
    p.add_argument("--actions")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--min-overlap", type=float, default=None)
    p.add_argument("--init-window", type=int, default=None)
    p.add_argument("--strict-paper", action="store_true", dest="strict_paper")
    p.add_argument("--vector-c9", action="store_true", dest="vector_c9")
    p.add_argument("--lenient-scene", action="store_true", dest="lenient")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--templates", nargs="*", help="scenario YAML files (default: built-ins)")
    p.add_argument("--only", nargs="*", help="restrict to these template names")
    p.add_argument("--seeds", type=int, default=1, help="seeds per template/noise combination")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--dropout", type=float, nargs="*")
    p.add_argument("--jitter", type=float, nargs="*")
    p.add_argument("--grip-offset", type=float, nargs="*")
    p.add_argument("--noise-seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="load inputs and report diagnostics")
    p.add_argument("--ontology")
    p.add_argument("--trace")
    p.add_argument("--actions")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("actions", help="print the built-in action library")
    p.add_argument("--dump", action="store_true", help="print the library source text")
    p.add_argument("--strict-paper", action="store_true", dest="strict_paper")
    _add_common(p)
    p.set_defaults(func=cmd_actions)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DemoplanError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
