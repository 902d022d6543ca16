"""Command-line behavior: artifacts, determinism, error exits, batch summaries."""

import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from roi_nbv import cli
from roi_nbv.config import ScenarioError, load_scenario
from roi_nbv.gain import UtilType
from roi_nbv.planner import PlannerMode

SCENARIO_TEXT = """\
scene:
  resolution_m: 0.01
  room_min_m: [-2.0, -2.0, 0.0]
  room_max_m: [2.0, 2.0, 2.2]
  fruit_semiaxis_min_m: 0.025
  fruit_semiaxis_max_m: 0.042
  fruit_gap_m: 0.03
plants:
  positions_m: [[0.0, 0.0, 0.0]]
  height_m: 0.9
  fruit_count: 4
  leaf_count: 10
  canopy_radius_m: 0.16
  fruit_zone_low_frac: 0.35
  fruit_zone_high_frac: 0.68
camera:
  width_px: 120
  height_px: 90
  fov_h_deg: 69.0
  fov_v_deg: 52.0
  min_range_m: 0.2
  max_range_m: 2.0
workspace:
  type: spherical_shell
  center_m: [0.0, 0.0, 0.5]
  inner_radius_m: 0.3
  outer_radius_m: 1.0
planner:
  mode: combined
  util_type: proximity
  n_vps: 30
  budget_s: 6.0
  move_speed_m_per_s: 0.25
  per_view_overhead_s: 1.0
  snapshot_interval_s: 2.0
  vp_distance_min_m: 0.3
  vp_distance_max_m: 1.0
  ray_rows: 10
  ray_cols: 14
  seed: 5
eval:
  max_dist_m: 0.1
  alpha: 0.05
  eval_range_m: 2.0
  utility_threshold: 0.2
map:
  resolution_m: 0.01
  hit_logodds: 0.85
  miss_logodds: -0.4
  roi_hit_logodds: 0.85
  roi_miss_logodds: -0.4
  min_logodds: -3.5
  max_logodds: 3.5
  roi_threshold: 0.0
detector:
  false_positive_rate: 0.002
  false_negative_rate: 0.05
"""


@pytest.fixture(scope="module")
def scenario_path(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    path = root / "mini.yaml"
    path.write_text(SCENARIO_TEXT, encoding="ascii")
    return path


@pytest.fixture(scope="module")
def run_artifacts(scenario_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = cli.main(["run", "--scenario", str(scenario_path), "--out-dir", str(out)])
    assert rc == 0
    return out


def artifact(out_dir, suffix):
    matches = sorted(out_dir.glob(f"*_{suffix}"))
    assert len(matches) == 1, f"expected one *_{suffix} in {out_dir}"
    return matches[0]


def parse_eval_stdout(text):
    fields = {}
    for line in text.strip().splitlines():
        key, value = line.split(" ", 1)
        fields[key] = None if value == "absent" else float(value)
    return fields


def last_snapshot_row(csv_path):
    rows = csv_path.read_text().strip().splitlines()
    for line in reversed(rows):
        cells = line.split(",")
        if cells[1] == "snapshot":
            return cells
    raise AssertionError("no snapshot row")


class TestRun:
    def test_writes_all_artifacts(self, run_artifacts):
        for suffix in ("trial.csv", "map.bin", "fruits.txt", "clusters.txt"):
            assert artifact(run_artifacts, suffix).stat().st_size > 0

    def test_stem_uses_scenario_name_and_seed(self, run_artifacts):
        assert (run_artifacts / "mini_seed5_trial.csv").exists()

    def test_same_seed_byte_identical(self, scenario_path, run_artifacts, tmp_path):
        rc = cli.main(
            ["run", "--scenario", str(scenario_path), "--seed", "5", "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        again_csv = (tmp_path / "mini_seed5_trial.csv").read_bytes()
        assert again_csv == artifact(run_artifacts, "trial.csv").read_bytes()
        again_map = (tmp_path / "mini_seed5_map.bin").read_bytes()
        assert again_map == artifact(run_artifacts, "map.bin").read_bytes()

    def test_different_seed_differs(self, scenario_path, run_artifacts, tmp_path):
        rc = cli.main(
            ["run", "--scenario", str(scenario_path), "--seed", "6", "--out-dir", str(tmp_path)]
        )
        assert rc == 0
        other = (tmp_path / "mini_seed6_trial.csv").read_bytes()
        assert other != artifact(run_artifacts, "trial.csv").read_bytes()

    def test_invalid_scenario_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("scene:\n  bogus: 1\n", encoding="ascii")
        rc = cli.main(["run", "--scenario", str(bad)])
        captured = capsys.readouterr()
        assert rc == 2
        assert "plants" in captured.err


class TestEval:
    def test_reproduces_final_snapshot(self, run_artifacts, capsys):
        rc = cli.main(
            [
                "eval",
                "--map", str(artifact(run_artifacts, "map.bin")),
                "--scene", str(artifact(run_artifacts, "fruits.txt")),
            ]
        )
        assert rc == 0
        fields = parse_eval_stdout(capsys.readouterr().out)
        cells = last_snapshot_row(artifact(run_artifacts, "trial.csv"))
        assert fields["detected_rois"] == float(cells[5])
        for key, col in (
            ("covered_roi_volume", 6),
            ("volume_accuracy", 7),
            ("center_distance_m", 8),
        ):
            expected = None if cells[col] == "" else float(cells[col])
            assert fields[key] == expected

    def test_resolution_mismatch_exits(self, run_artifacts, tmp_path, capsys):
        fruits = artifact(run_artifacts, "fruits.txt")
        coarse = tmp_path / "coarse.txt"
        coarse.write_text(
            fruits.read_text().replace("# resolution 0.01", "# resolution 0.02"),
            encoding="ascii",
        )
        rc = cli.main(
            ["eval", "--map", str(artifact(run_artifacts, "map.bin")), "--scene", str(coarse)]
        )
        captured = capsys.readouterr()
        assert rc == 2
        assert "resolution mismatch" in captured.err

    def test_garbage_map_exits(self, run_artifacts, tmp_path, capsys):
        junk = tmp_path / "junk.bin"
        junk.write_bytes(b"not a map at all, definitely not")
        rc = cli.main(
            ["eval", "--map", str(junk), "--scene", str(artifact(run_artifacts, "fruits.txt"))]
        )
        captured = capsys.readouterr()
        assert rc == 2
        assert "cannot load map" in captured.err


class TestExportScene:
    def test_perfect_map_scores_perfectly(self, scenario_path, tmp_path, capsys):
        rc = cli.main(
            [
                "export-scene",
                "--scenario", str(scenario_path),
                "--seed", "5",
                "--out-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        capsys.readouterr()
        rc = cli.main(
            [
                "eval",
                "--map", str(tmp_path / "mini_seed5_scene_map.bin"),
                "--scene", str(tmp_path / "mini_seed5_fruits.txt"),
            ]
        )
        assert rc == 0
        fields = parse_eval_stdout(capsys.readouterr().out)
        assert fields["detected_rois"] == 4.0
        assert fields["covered_roi_volume"] == 1.0
        assert fields["volume_accuracy"] == 1.0
        assert fields["center_distance_m"] == pytest.approx(0.0, abs=1e-12)


class TestBatch:
    def test_summary_and_artifacts(self, scenario_path, tmp_path, capsys):
        rc = cli.main(
            [
                "batch",
                "--scenario", str(scenario_path),
                "--trials", "2",
                "--variants", "combined_proximity,exploration_unobserved",
                "--out-dir", str(tmp_path),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        summary = (tmp_path / "summary.txt").read_text()
        assert out.startswith(summary)
        assert "trials 2 base_seed 5" in summary
        for variant in ("combined_proximity", "exploration_unobserved"):
            for seed in (5, 6):
                assert (tmp_path / variant / f"seed{seed}_trial.csv").exists()
            assert f"{variant} detected_rois" in summary
            assert f"{variant} covered_roi_volume" in summary
        p_lines = [l for l in summary.splitlines() if l.startswith("p[")]
        # both orderings for both compared metrics
        assert len(p_lines) == 4
        for line in p_lines:
            p = float(line.rsplit(" ", 1)[1])
            assert 0.0 <= p <= 1.0

    def test_unknown_variant_exits(self, scenario_path, tmp_path, capsys):
        rc = cli.main(
            [
                "batch",
                "--scenario", str(scenario_path),
                "--trials", "1",
                "--variants", "warp_drive",
                "--out-dir", str(tmp_path),
            ]
        )
        captured = capsys.readouterr()
        assert rc == 2
        assert "warp_drive" in captured.err


class TestVariantPlumbing:
    def test_apply_variant_sets_mode_and_util(self, scenario_path):
        planner = load_scenario(scenario_path).planner
        expectations = {
            "combined_unobserved": (PlannerMode.COMBINED, UtilType.UNOBSERVED),
            "combined_proximity": (PlannerMode.COMBINED, UtilType.PROXIMITY),
            "exploration_unobserved": (PlannerMode.EXPLORATION_ONLY, UtilType.UNOBSERVED),
            "exploration_proximity": (PlannerMode.EXPLORATION_ONLY, UtilType.PROXIMITY),
        }
        for name, (mode, util) in expectations.items():
            got = cli.apply_variant(planner, name)
            assert got.mode is mode
            assert got.eval.util_type is util
            # everything else untouched
            assert got.budget_s == planner.budget_s
            assert got.n_vps == planner.n_vps
            assert got.workspace is planner.workspace
            assert got.eval.max_dist == planner.eval.max_dist

    def test_apply_variant_unknown_name(self, scenario_path):
        planner = load_scenario(scenario_path).planner
        with pytest.raises(ScenarioError):
            cli.apply_variant(planner, "combined")

    def test_batch_spec_validation(self, scenario_path):
        scenario = load_scenario(scenario_path)
        with pytest.raises(ScenarioError):
            cli.BatchSpec(scenario=scenario, trials=0)
        with pytest.raises(ScenarioError):
            cli.BatchSpec(scenario=scenario, variants=())
        with pytest.raises(ScenarioError):
            cli.BatchSpec(scenario=scenario, variants=("nope",))
        spec = cli.BatchSpec(scenario=scenario)
        assert spec.trials == 20
        assert spec.variants == cli.DEFAULT_VARIANTS


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "roi_nbv.cli", "--help"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    for command in ("run", "batch", "eval", "export-scene"):
        assert command in proc.stdout
