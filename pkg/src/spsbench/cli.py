"""Benchmark command line.

Subcommands: `run` executes a matched-seed batch and writes records/summary
files, `report` re-aggregates a records file (tables, deltas and figures),
`kernels-check` prints the perception-kernel self-check suite.

Precedence for settings: command-line flags override the JSON config file,
which overrides built-in defaults; the SPSBENCH_OUT environment variable
supplies the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import kernels, simulator
from .scene import SceneSpec, SceneType, default_scene_spec

ENV_OUT_DIR = "SPSBENCH_OUT"
CONFIG_VERSION = 1

DEFAULT_SPEEDS = (5.0, 9.0, 13.0, 17.0)
DEFAULT_PLANNERS = ("sps", "grid")
DEFAULT_TRIALS = 100
DEFAULT_BASE_SEED = 7
DEFAULT_OUT_DIR = "results"

SCENE_ALIASES = {
    "forest": SceneType.FOREST,
    "static": SceneType.STATIC_SPHERES,
    "mixed": SceneType.MIXED_SPHERES,
}
SCENE_ORDER = (SceneType.FOREST, SceneType.STATIC_SPHERES, SceneType.MIXED_SPHERES)

#: SceneSpec fields a config file may override, per scene type.
SCENE_OVERRIDE_FIELDS = (
    "length",
    "width",
    "height",
    "obstacle_count",
    "radius_range",
    "dynamic_fraction",
    "dynamic_speed_range",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class BenchmarkConfig:
    scene_specs: tuple[SceneSpec, ...]
    speeds: tuple[float, ...]
    planners: tuple[str, ...]
    trials_per_cell: int
    base_seed: int
    out_dir: Path
    export_trajectories: int
    jobs: int


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a JSON object")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {version!r}")
    known = {
        "version",
        "speeds",
        "planners",
        "trials_per_cell",
        "base_seed",
        "out_dir",
        "export_trajectories",
        "jobs",
        "scenes",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(f"{key}: unknown config field")
    return doc


def _scene_spec_from_config(scene_type: SceneType, overrides) -> SceneSpec:
    spec = default_scene_spec(scene_type)
    if overrides is None:
        return spec
    if not isinstance(overrides, dict):
        raise ConfigError(f"scenes.{scene_type.value}: overrides must be an object")
    kwargs = {}
    for key, value in overrides.items():
        if key not in SCENE_OVERRIDE_FIELDS:
            raise ConfigError(f"scenes.{scene_type.value}.{key}: unknown scene field")
        if key in ("radius_range", "dynamic_speed_range"):
            value = tuple(value)
        kwargs[key] = value
    try:
        return SceneSpec(
            scene_type=scene_type,
            **{
                **{f: getattr(spec, f) for f in SCENE_OVERRIDE_FIELDS},
                **kwargs,
            },
        )
    except ValueError as e:
        raise ConfigError(f"scenes.{scene_type.value}: {e}") from e


def resolve_config(args) -> BenchmarkConfig:
    """Merge defaults, config file and flags into a validated run config."""
    doc = _load_config_file(args.config)

    scenes_doc = doc.get("scenes")
    if scenes_doc is not None and not isinstance(scenes_doc, dict):
        raise ConfigError("scenes: must be an object keyed by scene type")
    overrides = {}
    if scenes_doc:
        for key, value in scenes_doc.items():
            try:
                overrides[SceneType(key)] = value
            except ValueError:
                valid = ", ".join(t.value for t in SCENE_ORDER)
                raise ConfigError(f"scenes.{key}: unknown scene type (valid: {valid})") from None
    scene_types = list(SCENE_ORDER)
    if scenes_doc:
        scene_types = [t for t in SCENE_ORDER if t in overrides]
    if args.scene and args.scene != "all":
        scene_types = [SCENE_ALIASES[args.scene]]
    if not scene_types:
        raise ConfigError("scenes: no scene types selected")
    scene_specs = tuple(_scene_spec_from_config(t, overrides.get(t)) for t in scene_types)

    speeds = doc.get("speeds", list(DEFAULT_SPEEDS))
    if args.speed is not None:
        speeds = args.speed
    try:
        speeds = tuple(float(s) for s in speeds)
    except (TypeError, ValueError):
        raise ConfigError("speeds: must be a list of numbers") from None
    if not speeds or any(s <= 0.0 for s in speeds):
        raise ConfigError("speeds: must be positive and non-empty")

    planners = doc.get("planners", list(DEFAULT_PLANNERS))
    if args.planner:
        planners = list(dict.fromkeys(args.planner))
    if not isinstance(planners, (list, tuple)) or not planners:
        raise ConfigError("planners: must be a non-empty list")
    for p in planners:
        if p not in simulator.PLANNER_NAMES:
            valid = ", ".join(simulator.PLANNER_NAMES)
            raise ConfigError(f"planners: unknown planner {p!r} (valid: {valid})")

    trials = args.trials if args.trials is not None else doc.get("trials_per_cell", DEFAULT_TRIALS)
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError("trials_per_cell: must be an integer >= 1")

    base_seed = args.seed if args.seed is not None else doc.get("base_seed", DEFAULT_BASE_SEED)
    if not isinstance(base_seed, int) or not (0 <= base_seed < 2**64):
        raise ConfigError("base_seed: must be an unsigned 64-bit integer")

    out_dir = args.out or doc.get("out_dir") or os.environ.get(ENV_OUT_DIR) or DEFAULT_OUT_DIR

    export = (
        args.export_trajectories
        if args.export_trajectories is not None
        else doc.get("export_trajectories", 0)
    )
    if not isinstance(export, int) or export < 0:
        raise ConfigError("export_trajectories: must be an integer >= 0")

    jobs = args.jobs if args.jobs is not None else doc.get("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs: must be an integer >= 1")

    return BenchmarkConfig(
        scene_specs=scene_specs,
        speeds=speeds,
        planners=tuple(planners),
        trials_per_cell=trials,
        base_seed=base_seed,
        out_dir=Path(out_dir),
        export_trajectories=export,
        jobs=jobs,
    )


def _config_echo(cfg: BenchmarkConfig) -> str:
    scenes = {}
    for s in cfg.scene_specs:
        fields = {}
        for f in SCENE_OVERRIDE_FIELDS:
            v = getattr(s, f)
            fields[f] = list(v) if isinstance(v, tuple) else v
        scenes[s.scene_type.value] = fields
    doc = {
        "version": CONFIG_VERSION,
        "speeds": list(cfg.speeds),
        "planners": list(cfg.planners),
        "trials_per_cell": cfg.trials_per_cell,
        "base_seed": cfg.base_seed,
        "out_dir": str(cfg.out_dir),
        "export_trajectories": cfg.export_trajectories,
        "jobs": cfg.jobs,
        "scenes": scenes,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _print_summary_table(summary_rows, stream=None):
    stream = stream or sys.stdout
    header = f"{'scene_type':<15}{'speed':>7}{'planner':>8}{'success':>9}{'mean_a':>9}{'max_a':>9}{'cands':>8}"
    print(header, file=stream)
    for r in summary_rows:
        print(
            f"{r['scene_type']:<15}{r['speed']:>7.6g}{r['planner']:>8}"
            f"{r['success_rate']:>9.6g}{r['mean_accel']:>9.6g}{r['max_accel']:>9.6g}"
            f"{r['mean_candidates']:>8.6g}",
            file=stream,
        )


def cmd_run(args) -> int:
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    started = time.monotonic()
    total_cells = len(cfg.scene_specs) * len(cfg.speeds) * len(cfg.planners)
    print(
        f"running {total_cells} cells x {cfg.trials_per_cell} trials "
        f"(base seed {cfg.base_seed}, jobs {cfg.jobs})",
        file=sys.stderr,
    )

    def progress(done, total):
        if done % 200 == 0 or done == total:
            print(f"  {done}/{total} trials", file=sys.stderr)

    result = simulator.run_batch(
        cfg.scene_specs,
        cfg.speeds,
        cfg.planners,
        cfg.trials_per_cell,
        cfg.base_seed,
        jobs=cfg.jobs,
        keep_trajectories=cfg.export_trajectories,
        progress=progress if cfg.jobs == 1 else None,
    )

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "records.jsonl").write_text(simulator.records_to_jsonl(result.rows))
    (cfg.out_dir / "summary.csv").write_text(simulator.summary_to_csv(result.summary))
    (cfg.out_dir / "config.json").write_text(_config_echo(cfg))
    if result.trajectories:
        traj_dir = cfg.out_dir / "trajectories"
        traj_dir.mkdir(exist_ok=True)
        for (scene_type, speed, planner, trial), traj in sorted(result.trajectories.items()):
            name = f"traj_{scene_type}_{speed:g}_{planner}_{trial:03d}.csv"
            (traj_dir / name).write_text(simulator.trajectory_to_csv(traj))

    _print_summary_table(result.summary)
    elapsed = time.monotonic() - started
    print(f"wrote {cfg.out_dir}/records.jsonl ({len(result.rows)} trials, {elapsed:.1f}s)", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    records_path = Path(args.records)
    try:
        rows = simulator.rows_from_jsonl(records_path.read_text())
    except OSError as e:
        print(f"report error: cannot read records: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"report error: {e}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else records_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = simulator.summarize(rows)
    deltas = simulator.comparison_deltas(summary)
    (out_dir / "summary.csv").write_text(simulator.summary_to_csv(summary))
    (out_dir / "deltas.csv").write_text(simulator.deltas_to_csv(deltas))

    _print_summary_table(summary)
    if deltas:
        print()
        print(f"{'scene_type':<15}{'speed':>7}{'d_success':>11}{'mean_a_red%':>13}{'max_a_red%':>12}")
        for d in deltas:
            print(
                f"{d['scene_type']:<15}{d['speed']:>7.6g}{d['success_rate_delta']:>11.6g}"
                f"{d['mean_accel_reduction_pct']:>13.6g}{d['max_accel_reduction_pct']:>12.6g}"
            )

    if not args.no_figures:
        from . import plotting  # deferred: pulls in matplotlib

        paths = plotting.save_report_figures(summary, out_dir / "figures")
        print(f"wrote {len(paths)} figures to {out_dir / 'figures'}", file=sys.stderr)
    return 0


def cmd_kernels_check(args) -> int:
    checks = kernels.run_kernel_checks(seed=args.seed if args.seed is not None else 0)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  error={c.error:<12.6g} tol={c.tolerance:<8.6g} {status}")
        failed += not c.passed
    print(f"{len(checks) - failed}/{len(checks)} kernel checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spsbench",
        description="Spherical-search vs planar-grid obstacle-avoidance benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark batch and write records/summary")
    run.add_argument("--config", help="JSON config file (see README for the schema)")
    run.add_argument(
        "--planner",
        action="append",
        choices=simulator.PLANNER_NAMES,
        help="planner to run (repeatable; default both)",
    )
    run.add_argument(
        "--scene",
        choices=sorted(SCENE_ALIASES) + ["all"],
        help="restrict to one scene family",
    )
    run.add_argument("--speed", type=_speed_list, help="comma-separated speeds in m/s")
    run.add_argument("--trials", type=int, help="trials per cell")
    run.add_argument("--seed", type=int, help="base seed; trial i uses base+i")
    run.add_argument("--out", help=f"output directory (default ${ENV_OUT_DIR} or {DEFAULT_OUT_DIR})")
    run.add_argument(
        "--export-trajectories",
        type=int,
        metavar="N",
        help="export trajectory CSVs for the first N trials of each cell",
    )
    run.add_argument("--jobs", type=int, help="parallel worker processes")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="summary, deltas and figures from a records file")
    report.add_argument("records", help="records.jsonl produced by run")
    report.add_argument("--out", help="output directory (default: records directory)")
    report.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    report.set_defaults(func=cmd_report)

    kc = sub.add_parser("kernels-check", help="run the perception-kernel self checks")
    kc.add_argument("--seed", type=int, help="seed for the randomized checks")
    kc.set_defaults(func=cmd_kernels_check)
    return parser


def _speed_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid speed list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("speed list is empty")
    return values


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entry() -> None:  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":
    entry()
