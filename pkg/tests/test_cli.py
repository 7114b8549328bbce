# tests/test_cli.py
import json

import numpy as np
import pandas as pd
import pytest

from calibration.adaptive import dimension_adaptive_knn
from calibration.permutation import PermutationPlan
from main import main, parse_edge_grid, parse_grid
from samples.dataset import LabeledDataset, write_csv
from samples.scenarios import generate, save_scenario_config, scenario


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


@pytest.fixture
def location_csv(tmp_path):
    path = tmp_path / "loc.csv"
    write_csv(generate(scenario("dense-normal-loc", dim=3, seed=2, n0=15, n1=15)), path)
    return path


@pytest.fixture
def mixture_csv(tmp_path):
    path = tmp_path / "mixture.csv"
    write_csv(generate(scenario("normal-mixture-2d", seed=5, n0=150, n1=150)), path)
    return path


# --- Parsing helpers ---
def test_parse_grid():
    assert parse_grid("50x50:-4,4,-4,4") == ((50, 50), (-4.0, 4.0, -4.0, 4.0))
    with pytest.raises(ValueError):
        parse_grid("0x5:-1,1,-1,1")
    with pytest.raises(ValueError):
        parse_grid("5x5:1,-1,0,1")
    with pytest.raises(ValueError):
        parse_grid("5by5")


def test_parse_edge_grid():
    assert parse_edge_grid("200x200") == (200, 200)
    with pytest.raises(ValueError):
        parse_edge_grid("200")


# --- global ---
def test_global_json_is_reproducible(capsys, location_csv, check_schema):
    argv = ["global", str(location_csv), "--stat", "knn", "--k", "3", "--permutations", "19", "--seed", "7", "--quiet"]
    code, first = _run(capsys, argv)
    assert code == 0
    _, second = _run(capsys, argv + ["--jobs", "2"])
    a, b = json.loads(first), json.loads(second)
    for payload in (a, b):
        payload.pop("wall_time_sec")
    assert a == b
    check_schema(a, "test_outcome.schema.json")
    assert a["n_permutations"] == 19 and a["seed"] == 7


def test_global_forest(capsys, location_csv, tmp_path):
    argv = ["global", str(location_csv), "--stat", "rf", "--trees", "10", "--permutations", "9", "--seed", "7",
            "--quiet", "--output", str(tmp_path / "outcome.json")]
    code, out = _run(capsys, argv)
    assert code == 0
    saved = json.loads((tmp_path / "outcome.json").read_text(encoding="utf-8"))
    assert saved["p_value"] == json.loads(out)["p_value"]
    assert saved["wall_time_sec"] is not None


def test_kernel_without_bandwidth_is_usage_error(location_csv):
    with pytest.raises(SystemExit) as err:
        main(["global", str(location_csv), "--stat", "kernel", "--quiet"])
    assert err.value.code == 2


def test_bandwidth_for_knn_is_usage_error(location_csv):
    with pytest.raises(SystemExit) as err:
        main(["global", str(location_csv), "--stat", "knn", "--bandwidth", "1.0", "--quiet"])
    assert err.value.code == 2


def test_mmd_on_duplicated_groups(capsys, tmp_path):
    x = np.random.default_rng(4).standard_normal((20, 2))
    path = tmp_path / "dup.csv"
    write_csv(LabeledDataset(np.vstack([x, x]), np.repeat([0, 1], 20)), path)
    code, out = _run(capsys, ["global", str(path), "--stat", "mmd", "--permutations", "50", "--quiet"])
    outcome = json.loads(out)
    assert code == 0
    assert outcome["observed"] == pytest.approx(0.0, abs=1e-12)
    assert outcome["p_value"] == 1.0 and outcome["reject"] is False


def test_scenario_config_input(capsys, tmp_path):
    save_scenario_config(scenario("null-normal", dim=2, seed=1, n0=10, n1=10), tmp_path / "s.yaml")
    code, out = _run(capsys, ["global", "--scenario-config", str(tmp_path / "s.yaml"), "--stat", "energy",
                              "--permutations", "9", "--quiet"])
    assert code == 0 and json.loads(out)["statistic"] == "energy"


def test_data_errors_exit_nonzero(capsys, write_rows):
    path = write_rows("x1,label\n0,0\n1,2\n")
    assert main(["global", str(path), "--stat", "mmd", "--quiet"]) == 1
    assert "Error" in capsys.readouterr().err


def test_global_exact_enumeration(capsys, tmp_path, check_schema):
    path = tmp_path / "tiny.csv"
    write_csv(LabeledDataset(np.array([[0.0], [0.0], [0.0], [0.0], [5.0], [5.0], [5.0], [5.0]]), np.repeat([0, 1], 4)), path)
    code, out = _run(capsys, ["global", str(path), "--stat", "energy", "--exact", "--quiet"])
    outcome = json.loads(out)
    assert code == 0
    check_schema(outcome, "test_outcome.schema.json")
    assert outcome["n_permutations"] == 70
    assert outcome["p_value"] == 1 / 71 and outcome["reject"] is True


def test_exact_with_split_statistic_is_usage_error(location_csv):
    with pytest.raises(SystemExit) as err:
        main(["global", str(location_csv), "--stat", "knn-split", "--exact", "--quiet"])
    assert err.value.code == 2


def test_global_forest_importance(capsys, location_csv, check_schema):
    argv = ["global", str(location_csv), "--stat", "rf", "--trees", "10", "--permutations", "9", "--importance", "--quiet"]
    code, out = _run(capsys, argv)
    outcome = json.loads(out)
    assert code == 0
    check_schema(outcome, "test_outcome.schema.json")
    assert len(outcome["variable_importance"]) == 3
    assert all(value >= 0 for value in outcome["variable_importance"])


def test_importance_needs_forest(location_csv):
    with pytest.raises(SystemExit) as err:
        main(["global", str(location_csv), "--stat", "knn", "--importance", "--quiet"])
    assert err.value.code == 2


def test_adaptive_outcome_matches_schema(shifted_data, check_schema):
    outcome = dimension_adaptive_knn(shifted_data, [4.0, 4.0], 0.05, PermutationPlan(n_permutations=19, seed=0))
    document = outcome.model_dump(mode="json")
    check_schema(document, "test_outcome.schema.json")
    assert {"dim", "k", "statistic", "p_value", "reject"} == set(document["components"][0])


def test_schema_check_rejects_malformed_documents(shifted_data, check_schema):
    outcome = dimension_adaptive_knn(shifted_data, [4.0, 4.0], 0.05, PermutationPlan(n_permutations=19, seed=0))
    document = outcome.model_dump(mode="json")
    bad_component = json.loads(json.dumps(document))
    bad_component["components"][0]["p_value"] = 1.5
    with pytest.raises(AssertionError, match="maximum"):
        check_schema(bad_component, "test_outcome.schema.json")
    bad_type = json.loads(json.dumps(document))
    bad_type["n_permutations"] = "19"
    with pytest.raises(AssertionError, match="type"):
        check_schema(bad_type, "test_outcome.schema.json")
    nested = json.loads(json.dumps(document))
    nested["components"][0] = document
    with pytest.raises(AssertionError, match="unexpected property"):
        check_schema(nested, "test_outcome.schema.json")


# --- local ---
def test_local_grid_rows_and_summary(capsys, mixture_csv, tmp_path, check_schema):
    report_path = tmp_path / "local.csv"
    argv = ["local", str(mixture_csv), "--estimator", "knn", "--k", "20", "--grid", "6x5:-4,4,-4,4",
            "--correction", "hochberg", "--permutations", "49", "--output", str(report_path), "--quiet"]
    code, out = _run(capsys, argv)
    assert code == 0
    rows = pd.read_csv(report_path)
    assert len(rows) == 30
    assert {"point_id", "statistic", "p_value", "reject", "sign", "color"} <= set(rows.columns)
    summary = json.loads(out)
    check_schema(summary, "local_summary.schema.json")
    assert summary["red"] + summary["blue"] + summary["gray"] == 30
    assert summary["correction"] == "hochberg"


def test_local_without_correction_uses_raw_decisions(capsys, mixture_csv, tmp_path):
    report_path = tmp_path / "local.csv"
    argv = ["local", str(mixture_csv), "--estimator", "knn", "--k", "20", "--grid", "4x4:-3,3,-3,3",
            "--correction", "none", "--alpha", "0.1", "--permutations", "29", "--output", str(report_path), "--quiet"]
    assert main(argv) == 0
    rows = pd.read_csv(report_path)
    np.testing.assert_array_equal(rows["reject"].to_numpy(), rows["p_value"].to_numpy() < 0.1)


def test_local_asymptotic_has_validity_column(capsys, mixture_csv, tmp_path):
    report_path = tmp_path / "local.csv"
    argv = ["local", str(mixture_csv), "--estimator", "knn", "--k", "40", "--grid", "3x3:-2,2,-2,2",
            "--calibration", "asymptotic", "--output", str(report_path), "--quiet"]
    code, out = _run(capsys, argv)
    assert code == 0
    assert "valid" in pd.read_csv(report_path).columns
    assert json.loads(out)["calibration"] == "asymptotic"


def test_local_asymptotic_needs_smoother(mixture_csv, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["local", str(mixture_csv), "--estimator", "rf", "--grid", "2x2:0,1,0,1", "--calibration", "asymptotic",
              "--output", str(tmp_path / "r.csv"), "--quiet"])
    assert err.value.code == 2


def test_local_zero_points_is_usage_error(mixture_csv, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["local", str(mixture_csv), "--estimator", "knn", "--k", "5", "--grid", "0x4:-1,1,-1,1",
              "--output", str(tmp_path / "r.csv"), "--quiet"])
    assert err.value.code == 2


def test_local_adaptive_reports_neighbour_counts(capsys, mixture_csv, tmp_path, check_schema):
    report_path = tmp_path / "local.csv"
    argv = ["local", str(mixture_csv), "--estimator", "knn", "--adaptive", "--grid", "3x3:-2,2,-2,2",
            "--correction", "bonferroni", "--permutations", "19", "--output", str(report_path), "--quiet"]
    code, out = _run(capsys, argv)
    assert code == 0
    check_schema(json.loads(out), "local_summary.schema.json")
    rows = pd.read_csv(report_path)
    assert len(rows) == 9
    # n = 300, D = 2: k_n(1) = 45 and k_n(2) = 18
    assert set(rows["k"]) <= {45, 18}


def test_adaptive_with_fixed_k_is_usage_error(mixture_csv, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["local", str(mixture_csv), "--estimator", "knn", "--k", "5", "--adaptive", "--grid", "2x2:0,1,0,1",
              "--output", str(tmp_path / "r.csv"), "--quiet"])
    assert err.value.code == 2


def test_adaptive_needs_knn(mixture_csv, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["local", str(mixture_csv), "--estimator", "kernel", "--bandwidth", "1", "--adaptive",
              "--grid", "2x2:0,1,0,1", "--output", str(tmp_path / "r.csv"), "--quiet"])
    assert err.value.code == 2


# --- simulate ---
def test_simulate_single_repetition(capsys, tmp_path, check_schema):
    table_path = tmp_path / "table.csv"
    argv = ["simulate", "--scenario", "dense-normal-loc", "--dims", "3", "--n0", "10", "--n1", "10",
            "--stats", "mmd,energy", "--reps", "1", "--permutations", "9", "--output", str(table_path),
            "--outdir-base", str(tmp_path / "runs"), "--quiet"]
    code, out = _run(capsys, argv)
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "simulation_report.schema.json")
    assert len(payload["reports"]) == 1
    assert payload["reports"][0]["n_reps"] == 1
    table = pd.read_csv(table_path)
    assert list(table.columns) == ["scenario", "statistic", "D=3"]
    run_dir = next((tmp_path / "runs").iterdir())
    assert {"parameters.json", "power_log.csv", "power_table.csv", "simulation_report.json"} <= {p.name for p in run_dir.iterdir()}


def test_simulate_lda_presets_from_scenario_config(capsys, tmp_path, check_schema):
    config = tmp_path / "lda.yaml"
    save_scenario_config(scenario("lda-normal-means", dim=3, seed=4, n0=20, n1=20, shift=0.5), config)
    argv = ["simulate", "--scenario-config", str(config), "--dims", "3", "--stats", "hotelling,lda,lda-acc,lda-cv2",
            "--reps", "1", "--permutations", "9", "--quiet"]
    code, out = _run(capsys, argv)
    assert code == 0
    payload = json.loads(out)
    check_schema(payload, "simulation_report.schema.json")
    assert set(payload["reports"][0]["powers"]) == {"hotelling", "lda", "lda-acc", "lda-cv2"}


def test_simulate_unknown_scenario():
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--scenario", "nope", "--quiet"])
    assert err.value.code == 2


# --- embed ---
def test_embed_to_stdout_without_report(capsys, tmp_path):
    points = tmp_path / "points.csv"
    pd.DataFrame({"x1": [0.0, 1.0, 0.0], "x2": [0.0, 0.0, 2.0]}).to_csv(points, index=False)
    code, out = _run(capsys, ["embed", str(points), "--components", "2", "--quiet"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "point_id,psi1,psi2"
    assert len(lines) == 4


def test_embed_joins_local_report(capsys, mixture_csv, tmp_path):
    points_path, report_path, embed_path = tmp_path / "pts.csv", tmp_path / "local.csv", tmp_path / "embed.csv"
    assert main(["local", str(mixture_csv), "--estimator", "knn", "--k", "20", "--grid", "5x4:-3,3,-3,3",
                 "--points-out", str(points_path), "--permutations", "19", "--output", str(report_path), "--quiet"]) == 0
    assert main(["embed", str(points_path), "--k", "6", "--report", str(report_path), "--output", str(embed_path), "--quiet"]) == 0
    frame = pd.read_csv(embed_path)
    assert len(frame) == 20
    assert {"psi1", "psi2", "p_value", "reject", "sign", "color"} <= set(frame.columns)


def test_embed_report_mismatch(capsys, tmp_path):
    points = tmp_path / "points.csv"
    pd.DataFrame({"x1": [0.0, 1.0, 0.0, 3.0], "x2": [0.0, 0.0, 2.0, 1.0]}).to_csv(points, index=False)
    report = tmp_path / "report.csv"
    pd.DataFrame({"point_id": [0, 1], "p_value": [0.5, 0.5]}).to_csv(report, index=False)
    assert main(["embed", str(points), "--k", "2", "--report", str(report), "--quiet"]) == 1
    assert "rows" in capsys.readouterr().err


@pytest.mark.slow
def test_edge_images_local_then_embed(capsys, tmp_path, check_schema):
    data_path, points_path = tmp_path / "edges.csv", tmp_path / "edge_points.csv"
    report_path, embed_path = tmp_path / "edge_local.csv", tmp_path / "edge_embed.csv"
    write_csv(generate(scenario("edge-images", seed=4)), data_path)

    code, out = _run(capsys, ["local", str(data_path), "--estimator", "knn", "--k", "15", "--edge-grid", "8x8",
                              "--calibration", "asymptotic", "--correction", "hochberg",
                              "--points-out", str(points_path), "--output", str(report_path), "--quiet"])
    assert code == 0
    summary = json.loads(out)
    check_schema(summary, "local_summary.schema.json")
    assert summary["n_points"] == 64
    assert pd.read_csv(points_path).shape == (64, 257)

    assert main(["embed", str(points_path), "--k", "10", "--report", str(report_path),
                 "--output", str(embed_path), "--quiet"]) == 0
    frame = pd.read_csv(embed_path)
    report = pd.read_csv(report_path)
    assert frame["point_id"].tolist() == list(range(64))
    assert np.all(np.isfinite(frame[["psi1", "psi2"]].to_numpy()))
    np.testing.assert_array_equal(frame["color"].to_numpy(), report["color"].to_numpy())
    assert set(frame["color"]) <= {"red", "blue", "gray"}
