"""Scenario files: flat, typed key sections with units in the key names.

Values are read with the standard YAML scalar rules; the compose tree is
walked separately so every diagnostic can point at the offending line.
Unknown keys and duplicate keys are rejected, not ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .gain import EvalParams, UtilType
from .planner import PlannerConfig, PlannerMode
from .sampling import Box, Region, SphericalShell
from .sensor_sim import CameraModel, PlantConfig, SceneConfig
from .voxel_map import MapParams


class ScenarioError(Exception):
    """Configuration problem with file (and where possible line) context."""


@dataclass(eq=False)
class Scenario:
    """A parsed scenario: scene template, planner configuration, output dir.

    The scene itself is generated per trial from the trial seed, so variants
    sharing a seed sequence see identical plants.
    """

    name: str
    scene: SceneConfig
    planner: PlannerConfig
    out_dir: Path


_REGION_KEYS = {
    "box": {"type": "str", "min_corner_m": "vec3", "max_corner_m": "vec3"},
    "spherical_shell": {
        "type": "str",
        "center_m": "vec3",
        "inner_radius_m": "float",
        "outer_radius_m": "float",
    },
}

# section -> key -> (type, required)
_SCHEMA = {
    "scene": {
        "resolution_m": ("float", True),
        "room_min_m": ("vec3", True),
        "room_max_m": ("vec3", True),
        "fruit_semiaxis_min_m": ("float", True),
        "fruit_semiaxis_max_m": ("float", True),
        "fruit_gap_m": ("float", True),
        "floor_thickness_m": ("float", False),
    },
    "plants": {
        "positions_m": ("vec3list", True),
        "height_m": ("float", True),
        "fruit_count": ("int", True),
        "fruit_counts": ("intlist", False),
        "leaf_count": ("int", True),
        "canopy_radius_m": ("float", True),
        "fruit_zone_low_frac": ("float", True),
        "fruit_zone_high_frac": ("float", True),
    },
    "camera": {
        "width_px": ("int", True),
        "height_px": ("int", True),
        "fov_h_deg": ("float", True),
        "fov_v_deg": ("float", True),
        "min_range_m": ("float", True),
        "max_range_m": ("float", True),
    },
    "workspace": None,  # region section, validated by type
    "sampling_region": None,
    "planner": {
        "mode": ("str", True),
        "util_type": ("str", True),
        "n_vps": ("int", True),
        "budget_s": ("float", True),
        "move_speed_m_per_s": ("float", True),
        "per_view_overhead_s": ("float", True),
        "snapshot_interval_s": ("float", True),
        "vp_distance_min_m": ("float", True),
        "vp_distance_max_m": ("float", True),
        "ray_rows": ("int", True),
        "ray_cols": ("int", True),
        "seed": ("int", False),
        "initial_position_m": ("vec3", False),
    },
    "eval": {
        "max_dist_m": ("float", True),
        "alpha": ("float", True),
        "eval_range_m": ("float", True),
        "utility_threshold": ("float", True),
    },
    "map": {
        "resolution_m": ("float", True),
        "hit_logodds": ("float", True),
        "miss_logodds": ("float", True),
        "roi_hit_logodds": ("float", True),
        "roi_miss_logodds": ("float", True),
        "min_logodds": ("float", True),
        "max_logodds": ("float", True),
        "roi_threshold": ("float", True),
    },
    "detector": {
        "false_positive_rate": ("float", True),
        "false_negative_rate": ("float", True),
    },
    "output": {
        "dir": ("str", True),
    },
}

_REQUIRED_SECTIONS = ("scene", "plants", "camera", "workspace", "planner", "eval", "map")


def _collect_lines(node, prefix, lines, path):
    if not isinstance(node, yaml.MappingNode):
        return
    seen = set()
    for key_node, value_node in node.value:
        key = str(key_node.value)
        line = key_node.start_mark.line + 1
        if key in seen:
            raise ScenarioError(f"{path}:{line}: duplicate key '{'.'.join(prefix + (key,))}'")
        seen.add(key)
        lines[prefix + (key,)] = line
        _collect_lines(value_node, prefix + (key,), lines, path)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(value, kind):
    if kind == "float":
        return _is_number(value)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "vec3":
        return isinstance(value, list) and len(value) == 3 and all(_is_number(v) for v in value)
    if kind == "vec3list":
        return (
            isinstance(value, list)
            and len(value) >= 1
            and all(_check_type(v, "vec3") for v in value)
        )
    if kind == "intlist":
        return (
            isinstance(value, list)
            and len(value) >= 1
            and all(_check_type(v, "int") for v in value)
        )
    raise AssertionError(f"unknown kind {kind}")


def _validate_section(path, lines, section, data, schema):
    if not isinstance(data, dict):
        line = lines.get((section,), 0)
        raise ScenarioError(f"{path}:{line}: section '{section}' must be a mapping")
    for key, value in data.items():
        if key not in schema:
            line = lines.get((section, key), 0)
            raise ScenarioError(f"{path}:{line}: unknown key '{key}' in section '{section}'")
        kind = schema[key][0] if isinstance(schema[key], tuple) else schema[key]
        if not _check_type(value, kind):
            line = lines.get((section, key), 0)
            raise ScenarioError(f"{path}:{line}: key '{section}.{key}' must be of type {kind}")
    for key, spec in schema.items():
        required = spec[1] if isinstance(spec, tuple) else True
        if required and key not in data:
            raise ScenarioError(f"{path}: missing required key '{section}.{key}'")


def _build_region(path, lines, section, data) -> Region:
    if not isinstance(data, dict) or "type" not in data:
        line = lines.get((section,), 0)
        raise ScenarioError(f"{path}:{line}: section '{section}' needs a 'type' key")
    kind = data["type"]
    if kind not in _REGION_KEYS:
        line = lines.get((section, "type"), 0)
        raise ScenarioError(
            f"{path}:{line}: '{section}.type' must be one of {sorted(_REGION_KEYS)}"
        )
    _validate_section(path, lines, section, data, _REGION_KEYS[kind])
    try:
        if kind == "box":
            return Box(data["min_corner_m"], data["max_corner_m"])
        return SphericalShell(data["center_m"], data["inner_radius_m"], data["outer_radius_m"])
    except ValueError as exc:
        line = lines.get((section,), 0)
        raise ScenarioError(f"{path}:{line}: invalid {section}: {exc}") from exc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario: {exc}") from exc
    try:
        data = yaml.safe_load(text)
        tree = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else str(path)
        raise ScenarioError(f"{where}: invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario must be a mapping of sections")

    lines: dict[tuple, int] = {}
    _collect_lines(tree, (), lines, path)

    for section in data:
        if section not in _SCHEMA:
            line = lines.get((section,), 0)
            raise ScenarioError(f"{path}:{line}: unknown section '{section}'")
    for section in _REQUIRED_SECTIONS:
        if section not in data:
            raise ScenarioError(f"{path}: missing required section '{section}'")

    for section, schema in _SCHEMA.items():
        if schema is not None and section in data:
            _validate_section(path, lines, section, data[section], schema)

    workspace = _build_region(path, lines, "workspace", data["workspace"])
    sampling_region = None
    if "sampling_region" in data:
        sampling_region = _build_region(path, lines, "sampling_region", data["sampling_region"])

    sc = data["scene"]
    pl = data["plants"]
    cam = data["camera"]
    pn = data["planner"]
    ev = data["eval"]
    mp = data["map"]
    det = data.get("detector", {"false_positive_rate": 0.0, "false_negative_rate": 0.0})
    out_dir = Path(data.get("output", {}).get("dir", "results"))

    def fail(section, exc):
        line = lines.get((section,), 0)
        raise ScenarioError(f"{path}:{line}: invalid {section}: {exc}") from exc

    positions = pl["positions_m"]
    fruit_counts = pl.get("fruit_counts")
    if fruit_counts is not None and len(fruit_counts) != len(positions):
        line = lines.get(("plants", "fruit_counts"), 0)
        raise ScenarioError(
            f"{path}:{line}: plants.fruit_counts needs one entry per plant "
            f"({len(positions)} positions, {len(fruit_counts)} counts)"
        )
    if fruit_counts is None:
        fruit_counts = [int(pl["fruit_count"])] * len(positions)
    try:
        plants = tuple(
            PlantConfig(
                position=tuple(float(v) for v in pos),
                height=float(pl["height_m"]),
                fruit_count=int(count),
                leaf_count=int(pl["leaf_count"]),
                canopy_radius=float(pl["canopy_radius_m"]),
                fruit_zone=(float(pl["fruit_zone_low_frac"]), float(pl["fruit_zone_high_frac"])),
            )
            for pos, count in zip(positions, fruit_counts)
        )
        scene = SceneConfig(
            resolution=float(sc["resolution_m"]),
            room_min=tuple(float(v) for v in sc["room_min_m"]),
            room_max=tuple(float(v) for v in sc["room_max_m"]),
            plants=plants,
            fruit_semiaxis_range=(
                float(sc["fruit_semiaxis_min_m"]),
                float(sc["fruit_semiaxis_max_m"]),
            ),
            fruit_gap=float(sc["fruit_gap_m"]),
            floor_thickness=float(sc.get("floor_thickness_m", 0.0)),
        )
    except (ValueError, RuntimeError) as exc:
        fail("scene", exc)

    try:
        camera = CameraModel(
            width=int(cam["width_px"]),
            height=int(cam["height_px"]),
            fov_h_deg=float(cam["fov_h_deg"]),
            fov_v_deg=float(cam["fov_v_deg"]),
            min_range=float(cam["min_range_m"]),
            max_range=float(cam["max_range_m"]),
        )
    except ValueError as exc:
        fail("camera", exc)

    try:
        mode = PlannerMode(pn["mode"])
    except ValueError as exc:
        line = lines.get(("planner", "mode"), 0)
        raise ScenarioError(
            f"{path}:{line}: planner.mode must be one of "
            f"{sorted(m.value for m in PlannerMode)}"
        ) from exc
    try:
        util_type = UtilType(pn["util_type"])
    except ValueError as exc:
        line = lines.get(("planner", "util_type"), 0)
        raise ScenarioError(
            f"{path}:{line}: planner.util_type must be one of "
            f"{sorted(u.value for u in UtilType)}"
        ) from exc

    try:
        eval_params = EvalParams(
            util_type=util_type,
            max_dist=float(ev["max_dist_m"]),
            alpha=float(ev["alpha"]),
            eval_range=float(ev["eval_range_m"]),
            utility_threshold=float(ev["utility_threshold"]),
        )
    except ValueError as exc:
        fail("eval", exc)

    try:
        map_params = MapParams(
            hit_logodds=float(mp["hit_logodds"]),
            miss_logodds=float(mp["miss_logodds"]),
            roi_hit_logodds=float(mp["roi_hit_logodds"]),
            roi_miss_logodds=float(mp["roi_miss_logodds"]),
            min_logodds=float(mp["min_logodds"]),
            max_logodds=float(mp["max_logodds"]),
            roi_threshold=float(mp["roi_threshold"]),
        )
    except ValueError as exc:
        fail("map", exc)

    initial = pn.get("initial_position_m")
    try:
        planner = PlannerConfig(
            workspace=workspace,
            mode=mode,
            eval=eval_params,
            n_vps=int(pn["n_vps"]),
            budget_s=float(pn["budget_s"]),
            move_speed_m_per_s=float(pn["move_speed_m_per_s"]),
            per_view_overhead_s=float(pn["per_view_overhead_s"]),
            seed=int(pn.get("seed", 0)),
            sampling_region=sampling_region,
            camera=camera,
            map_resolution=float(mp["resolution_m"]),
            map_params=map_params,
            false_positive_rate=float(det["false_positive_rate"]),
            false_negative_rate=float(det["false_negative_rate"]),
            snapshot_interval_s=float(pn["snapshot_interval_s"]),
            vp_distance_range=(float(pn["vp_distance_min_m"]), float(pn["vp_distance_max_m"])),
            ray_rows=int(pn["ray_rows"]),
            ray_cols=int(pn["ray_cols"]),
            initial_position=None if initial is None else tuple(float(v) for v in initial),
        )
    except ValueError as exc:
        fail("planner", exc)

    return Scenario(name=path.stem, scene=scene, planner=planner, out_dir=out_dir)
