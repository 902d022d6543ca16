"""Experiment runner: single trials, batch comparisons, offline evaluation."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import MetricReport, cluster_rois, compute_metrics, mann_whitney_u_one_sided
from .config import Scenario, ScenarioError, load_scenario
from .gain import UtilType
from .planner import PlannerConfig, PlannerMode, TrialLog, run_trial
from .sensor_sim import generate_scene, read_fruit_table, write_fruit_table
from .voxel_map import RoiMap

# The four experiment arms: planning mode crossed with utility type.
VARIANTS = {
    "combined_unobserved": (PlannerMode.COMBINED, UtilType.UNOBSERVED),
    "combined_proximity": (PlannerMode.COMBINED, UtilType.PROXIMITY),
    "exploration_unobserved": (PlannerMode.EXPLORATION_ONLY, UtilType.UNOBSERVED),
    "exploration_proximity": (PlannerMode.EXPLORATION_ONLY, UtilType.PROXIMITY),
}
DEFAULT_VARIANTS = tuple(VARIANTS)

_METRIC_FIELDS = ("detected_rois", "covered_roi_volume", "volume_accuracy", "center_distance")


def apply_variant(planner: PlannerConfig, name: str) -> PlannerConfig:
    if name not in VARIANTS:
        raise ScenarioError(f"unknown variant '{name}'; choose from {sorted(VARIANTS)}")
    mode, util_type = VARIANTS[name]
    return replace(planner, mode=mode, eval=replace(planner.eval, util_type=util_type))


@dataclass(eq=False)
class BatchSpec:
    """A batch: one scenario run under several variants with derived seeds."""

    scenario: Scenario
    variants: tuple[str, ...] = DEFAULT_VARIANTS
    trials: int = 20
    base_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ScenarioError("trial count must be at least 1")
        if not self.variants:
            raise ScenarioError("at least one variant is required")
        for name in self.variants:
            if name not in VARIANTS:
                raise ScenarioError(f"unknown variant '{name}'; choose from {sorted(VARIANTS)}")


def _final_report(log: TrialLog, fruit_gt) -> MetricReport:
    vm = log.final_map
    return compute_metrics(cluster_rois(vm), fruit_gt, vm.resolution)


def _fmt(value) -> str:
    return "absent" if value is None else repr(float(value))


def _cluster_report_text(clusters, report: MetricReport) -> str:
    lines = [f"clusters {len(clusters)}"]
    for i, c in enumerate(clusters):
        lines.append(
            f"cluster {i}: centroid {c.centroid[0]!r} {c.centroid[1]!r} {c.centroid[2]!r}"
            f" aabb_min {c.aabb_min[0]!r} {c.aabb_min[1]!r} {c.aabb_min[2]!r}"
            f" aabb_max {c.aabb_max[0]!r} {c.aabb_max[1]!r} {c.aabb_max[2]!r}"
            f" volume_m3 {c.volume!r} voxels {len(c.voxels)}"
        )
    lines.append(f"detected_rois {report.detected_rois}")
    lines.append(f"center_distance_m {_fmt(report.center_distance)}")
    lines.append(f"volume_accuracy {_fmt(report.volume_accuracy)}")
    lines.append(f"covered_roi_volume {_fmt(report.covered_roi_volume)}")
    return "\n".join(lines) + "\n"


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    planner = scenario.planner
    if getattr(args, "snapshot_interval_s", None) is not None:
        planner = replace(planner, snapshot_interval_s=args.snapshot_interval_s)
    out_dir = Path(args.out_dir) if getattr(args, "out_dir", None) else scenario.out_dir
    return Scenario(name=scenario.name, scene=scenario.scene, planner=planner, out_dir=out_dir)


def cmd_run(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    seed = scenario.planner.seed if args.seed is None else args.seed
    out_dir = scenario.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = generate_scene(scenario.scene, seed)
    log = run_trial(scene, scenario.planner, seed)
    stem = f"{scenario.name}_seed{seed}"
    csv_path = out_dir / f"{stem}_trial.csv"
    log.write_csv(csv_path)
    (out_dir / f"{stem}_map.bin").write_bytes(log.final_map.serialize())
    write_fruit_table(out_dir / f"{stem}_fruits.txt", scene)
    clusters = cluster_rois(log.final_map)
    report = compute_metrics(clusters, scene.fruit_gt, log.final_map.resolution)
    (out_dir / f"{stem}_clusters.txt").write_text(
        _cluster_report_text(clusters, report), encoding="ascii"
    )
    print(
        f"{stem}: moves {len(log.moves)}, detected {report.detected_rois}/{len(scene.fruit_gt)},"
        f" covered {_fmt(report.covered_roi_volume)} -> {csv_path}"
    )
    return 0


def _mean_std(values) -> str:
    values = [v for v in values if v is not None]
    if not values:
        return "absent"
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return f"{mean:.4f} +- {std:.4f} (n={len(values)})"


def run_batch(spec: BatchSpec, out_dir: Path) -> str:
    """Run every variant x trial, write artifacts, return the summary text."""
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: dict[str, list[MetricReport]] = {}
    for variant in spec.variants:
        planner = apply_variant(spec.scenario.planner, variant)
        variant_dir = out_dir / variant
        variant_dir.mkdir(parents=True, exist_ok=True)
        reports[variant] = []
        for i in range(spec.trials):
            seed = spec.base_seed + i
            scene = generate_scene(spec.scenario.scene, seed)
            log = run_trial(scene, planner, seed)
            log.write_csv(variant_dir / f"seed{seed}_trial.csv")
            reports[variant].append(_final_report(log, scene.fruit_gt))

    lines = [
        f"scenario {spec.scenario.name}",
        f"trials {spec.trials} base_seed {spec.base_seed}",
    ]
    for variant in spec.variants:
        rs = reports[variant]
        for metric in _METRIC_FIELDS:
            values = [getattr(r, metric) for r in rs]
            lines.append(f"{variant} {metric} {_mean_std(values)}")
    for metric in ("covered_roi_volume", "detected_rois"):
        for a in spec.variants:
            for b in spec.variants:
                if a == b:
                    continue
                xs = [getattr(r, metric) or 0.0 for r in reports[a]]
                ys = [getattr(r, metric) or 0.0 for r in reports[b]]
                _, p = mann_whitney_u_one_sided(xs, ys)
                lines.append(f"p[{a} > {b}] {metric} {p!r}")
    return "\n".join(lines) + "\n"


def cmd_batch(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    variants = tuple(args.variants.split(",")) if args.variants else DEFAULT_VARIANTS
    base_seed = scenario.planner.seed if args.seed is None else args.seed
    spec = BatchSpec(
        scenario=scenario, variants=variants, trials=args.trials, base_seed=base_seed
    )
    summary = run_batch(spec, scenario.out_dir)
    path = scenario.out_dir / "summary.txt"
    path.write_text(summary, encoding="ascii")
    print(summary, end="")
    print(f"summary -> {path}")
    return 0


def cmd_eval(args) -> int:
    params = None
    if args.scenario is not None:
        params = load_scenario(args.scenario).planner.map_params
    try:
        vm = RoiMap.deserialize(Path(args.map).read_bytes(), params)
    except (OSError, ValueError) as exc:
        print(f"cannot load map: {exc}", file=sys.stderr)
        return 2
    try:
        resolution, fruit_gt = read_fruit_table(args.scene)
    except (OSError, ValueError) as exc:
        print(f"cannot load scene ground truth: {exc}", file=sys.stderr)
        return 2
    if resolution != vm.resolution:
        print(
            f"resolution mismatch: map {vm.resolution!r} m vs scene {resolution!r} m",
            file=sys.stderr,
        )
        return 2
    report = compute_metrics(cluster_rois(vm), fruit_gt, vm.resolution)
    print(f"detected_rois {report.detected_rois}")
    print(f"center_distance_m {_fmt(report.center_distance)}")
    print(f"volume_accuracy {_fmt(report.volume_accuracy)}")
    print(f"covered_roi_volume {_fmt(report.covered_roi_volume)}")
    return 0


def cmd_export_scene(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    seed = scenario.planner.seed if args.seed is None else args.seed
    out_dir = scenario.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = generate_scene(scenario.scene, seed)
    stem = f"{scenario.name}_seed{seed}"
    (out_dir / f"{stem}_scene_map.bin").write_bytes(scene.to_roi_map().serialize())
    write_fruit_table(out_dir / f"{stem}_fruits.txt", scene)
    print(
        f"{stem}: {scene.occupied_count} occupied voxels, {len(scene.fruit_gt)} fruits"
        f" -> {out_dir}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roi-nbv",
        description="Next-best-view fruit-mapping experiments in a simulated scene.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one trial and write its artifacts")
    run_p.add_argument("--scenario", required=True, help="scenario YAML file")
    run_p.add_argument("--seed", type=int, default=None, help="trial seed")
    run_p.add_argument("--out-dir", default=None, help="output directory override")
    run_p.add_argument("--snapshot-interval-s", type=float, default=None)
    run_p.set_defaults(func=cmd_run)

    batch_p = sub.add_parser("batch", help="run a variant comparison batch")
    batch_p.add_argument("--scenario", required=True)
    batch_p.add_argument("--trials", type=int, default=20)
    batch_p.add_argument("--seed", type=int, default=None, help="base seed; trial i uses base+i")
    batch_p.add_argument(
        "--variants",
        default=None,
        help="comma-separated subset of: " + ",".join(DEFAULT_VARIANTS),
    )
    batch_p.add_argument("--out-dir", default=None)
    batch_p.add_argument("--snapshot-interval-s", type=float, default=None)
    batch_p.set_defaults(func=cmd_batch)

    eval_p = sub.add_parser("eval", help="re-evaluate a saved map against ground truth")
    eval_p.add_argument("--map", required=True, help="map binary written by run")
    eval_p.add_argument("--scene", required=True, help="fruit ground-truth table")
    eval_p.add_argument("--scenario", default=None, help="optional scenario for map params")
    eval_p.set_defaults(func=cmd_eval)

    export_p = sub.add_parser("export-scene", help="write a scene's map and fruit table")
    export_p.add_argument("--scenario", required=True)
    export_p.add_argument("--seed", type=int, default=None)
    export_p.add_argument("--out-dir", default=None)
    export_p.set_defaults(func=cmd_export_scene)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
