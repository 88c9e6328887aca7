import math
import statistics
from pathlib import Path

import pandas as pd
import pytest

from app.schemas.schemas import Algorithm, ExperimentConfig, ScenarioName
from app.services.learners.config.learners_config import DEVIATION_GBDT, DEVIATION_RANDOM_SEARCH
from app.services.runner.config.runner_config import SUMMARY_KEY_COLUMNS, SUMMARY_ROW_COLUMNS
from app.services.runner.core.aggregate_engine import aggregate_reports, plot_table
from app.services.runner.execute_experiment import ExperimentRunnerService, build_report
from app.services.runner.experiment_config import apply_overrides, config_hash, load_experiment_config
from app.services.runner.manifest import deviations_for
from app.services.shared.exceptions import ConfigError, SchemaMismatch
from app.services.shared.output_file import load_output_file
from app.services.synthdata.core.dataset import load_dataset


def _summary_frame(seed: int, value, metric: str = "fpr", scenario: str = "scenario2") -> pd.DataFrame:
    return pd.DataFrame(
        [{
            "scenario": scenario,
            "world": None,
            "iteration": 0,
            "policy": "global",
            "label_source": "true_labels",
            "metric": metric,
            "seed": seed,
            "value": value,
        }],
        columns=SUMMARY_ROW_COLUMNS,
    )


# ---------------------------------------------------------------------------
# aggregate_reports
# ---------------------------------------------------------------------------

def test_single_seed_median_equals_extremes():
    summary = aggregate_reports([_summary_frame(1, 0.07)])
    row = summary.iloc[0]
    assert row["median"] == row["min"] == row["max"] == 0.07
    assert row["n_seeds"] == 1


def test_three_seeds():
    summary = aggregate_reports([_summary_frame(s, float(v)) for s, v in [(1, 3), (2, 1), (3, 2)]])
    row = summary.iloc[0]
    assert (row["median"], row["min"], row["max"]) == (2.0, 1.0, 3.0)
    assert row["n_seeds"] == 3
    assert row["n_undefined"] == 0


def test_undefined_values_are_counted():
    summary = aggregate_reports([_summary_frame(1, 0.5), _summary_frame(2, None), _summary_frame(3, 1.5)])
    row = summary.iloc[0]
    assert row["median"] == 1.0
    assert row["n_undefined"] == 1


def test_metrics_are_summarised_separately():
    frames = [_summary_frame(1, 0.1), _summary_frame(1, 0.9, metric="tpr")]
    summary = aggregate_reports(frames)
    assert sorted(summary["metric"]) == ["fpr", "tpr"]
    assert list(summary.columns) == SUMMARY_KEY_COLUMNS + ["median", "min", "max", "n_seeds", "n_undefined"]


def test_schema_mismatches_are_rejected():
    with pytest.raises(SchemaMismatch):
        aggregate_reports([])
    with pytest.raises(SchemaMismatch):
        aggregate_reports([_summary_frame(1, 0.1), _summary_frame(2, 0.2).drop(columns=["policy"])])
    with pytest.raises(SchemaMismatch):
        aggregate_reports([pd.DataFrame({"seed": [1], "value": [0.1]})])


def test_mixed_scenarios_are_rejected():
    with pytest.raises(SchemaMismatch):
        aggregate_reports([_summary_frame(1, 0.1), _summary_frame(2, 0.2, scenario="scenario1")])


def test_plot_table_renames_axes():
    frame = pd.DataFrame({"seed": [2, 1], "iteration": [0, 0], "fpr": [0.1, 0.2]})
    table = plot_table([frame], x="iteration", y="fpr", keys=["seed"])
    assert list(table.columns) == ["seed", "x", "y"]
    assert table["seed"].tolist() == [1, 2]


# ---------------------------------------------------------------------------
# 実験設定
# ---------------------------------------------------------------------------

def test_config_loading_defaults_and_errors(tmp_path):
    assert load_experiment_config(None) == ExperimentConfig()
    empty = tmp_path / "empty.json"
    empty.write_text("", encoding="utf-8")
    assert load_experiment_config(empty) == ExperimentConfig()

    cases = {
        "broken.json": "{not json",
        "unknown.json": '{"unknown_key": 1}',
        "invalid.json": '{"n_trials": 0}',
        "seeds.json": '{"seeds": [1, 1]}',
    }
    for name, text in cases.items():
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_experiment_config(path)
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "missing.json")


def test_overrides(tiny_experiment):
    shifted = apply_overrides(tiny_experiment, seed_offset=10, out="elsewhere", trials=7)
    assert shifted.seeds == [11, 12]
    assert shifted.output_dir == "elsewhere"
    assert shifted.n_trials == 7
    assert apply_overrides(tiny_experiment) == tiny_experiment
    with pytest.raises(ConfigError):
        apply_overrides(tiny_experiment, trials=0)


def test_config_hash_tracks_content(tiny_experiment):
    digest = config_hash(tiny_experiment)
    assert len(digest) == 64
    assert config_hash(tiny_experiment.model_copy()) == digest
    assert config_hash(apply_overrides(tiny_experiment, trials=3)) != digest


def test_deviations(tiny_experiment):
    assert deviations_for(tiny_experiment) == [DEVIATION_RANDOM_SEARCH]
    gbdt = tiny_experiment.model_copy(update={"algorithm": Algorithm.GBDT})
    assert deviations_for(gbdt) == [DEVIATION_RANDOM_SEARCH, DEVIATION_GBDT]
    assert deviations_for(gbdt, used_search=False) == [DEVIATION_GBDT]


# ---------------------------------------------------------------------------
# ExperimentRunnerService
# ---------------------------------------------------------------------------

def test_generate_and_verify_datasets(tiny_experiment):
    service = ExperimentRunnerService(tiny_experiment, workers=1)
    files = service.generate_datasets()
    out = Path(tiny_experiment.output_dir)
    dataset_path = out / "dataset_seed1.csv"
    assert str(dataset_path) in files["seed1"]
    assert load_dataset(dataset_path).n_instances == tiny_experiment.base.n

    manifest = load_output_file(out / "manifest.json")
    assert manifest["config_hash"] == config_hash(tiny_experiment)
    assert DEVIATION_RANDOM_SEARCH not in manifest["deviations"]

    reports = service.verify_bias()
    assert len(reports) == 2
    assert (out / "bias_verification_seed2.json").exists()
    assert len(service.verify_bias(dataset_path)) == 1
    assert (out / "bias_verification_dataset_seed1.json").exists()


def test_scenario2_run_is_reproducible(tiny_experiment, tmp_path):
    outputs = []
    for name in ("first", "second"):
        config = apply_overrides(tiny_experiment, out=str(tmp_path / name))
        ExperimentRunnerService(config, workers=1).run_scenarios()
        build_report(config.output_dir)
        outputs.append(Path(config.output_dir))

    first, second = outputs
    for name in (
        "scenario2_seed1.json",
        "scenario2_seed2.json",
        "metrics_seed1.csv",
        "ledger_seed2.csv",
        "summary.csv",
        "plot_scenario2.csv",
        "models/seed1_iter0.json",
    ):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    manifest = load_output_file(first / "manifest.json")
    assert manifest["seeds"] == [1, 2]
    assert all(Path(p).exists() for paths in manifest["files"].values() for p in paths)
    assert set(manifest["stage_seconds"]) == {"seed1", "seed2", "total"}
    assert (first / "config.schema.json").exists()


def test_summary_matches_sort_based_median(tiny_experiment):
    ExperimentRunnerService(tiny_experiment, workers=1).run_scenarios()
    out = Path(tiny_experiment.output_dir)
    build_report(out)
    summary = pd.read_csv(out / "summary.csv")
    rows = pd.concat([pd.read_csv(p) for p in sorted(out.glob("summary_rows_seed*.csv"))], ignore_index=True)

    real_fpr = rows[(rows["metric"] == "fpr") & (rows["label_source"] == "true_labels")]
    assert len(real_fpr) == 2 * 4
    for iteration, group in real_fpr.groupby("iteration"):
        values = sorted(group["value"].dropna())
        n = len(values)
        expected = values[n // 2] if n % 2 else (values[n // 2 - 1] + values[n // 2]) / 2
        row = summary[
            (summary["metric"] == "fpr")
            & (summary["label_source"] == "true_labels")
            & (summary["iteration"] == iteration)
        ]
        assert len(row) == 1
        assert math.isclose(row["median"].iloc[0], expected)
        assert math.isclose(row["median"].iloc[0], statistics.median(values))


def test_report_without_inputs(tmp_path):
    with pytest.raises(SchemaMismatch):
        build_report(tmp_path)


@pytest.mark.slow
def test_parallel_workers_match_sequential(tiny_experiment, tmp_path):
    sequential = apply_overrides(tiny_experiment, out=str(tmp_path / "sequential"))
    parallel = apply_overrides(tiny_experiment, out=str(tmp_path / "parallel"))
    ExperimentRunnerService(sequential, workers=1).run_scenarios()
    ExperimentRunnerService(parallel, workers=2).run_scenarios()
    for name in ("scenario2_seed1.json", "scenario2_seed2.json"):
        assert (tmp_path / "sequential" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()


def test_scenario1_summary_has_one_row_per_world(tiny_experiment):
    config = tiny_experiment.model_copy(update={"scenario": ScenarioName.SCENARIO1})
    ExperimentRunnerService(config, workers=1).run_scenarios()
    written = build_report(config.output_dir)
    assert [p.name for p in written] == ["summary.csv", "plot_scenario1.csv"]
    summary = pd.read_csv(Path(config.output_dir) / "summary.csv")
    tpr = summary[summary["metric"] == "tpr"]
    assert sorted(tpr["world"]) == ["adaptation", "performance_ideal", "unbiased_baseline"]
    assert (tpr["n_seeds"] == 2).all()
