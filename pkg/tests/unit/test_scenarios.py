import math
import statistics
import time
from pathlib import Path
from typing import List, Tuple

import numpy as np
import pytest

from app.schemas.schemas import (
    BaseDataConfig,
    BiasSpec,
    DynamicShiftSpec,
    ExperimentConfig,
    FittedThresholds,
    IterationRecord,
    Log2Ratio,
    ModelConfig,
    PolicyKind,
    Scenario2Report,
    ScenarioName,
    ThresholdPolicy,
    TrialResult,
    World,
)
from app.services.learners.train_model import train_logreg
from app.services.runner.config.runner_config import SCENARIO2_REPORT_FILE
from app.services.runner.execute_experiment import ExperimentRunnerService
from app.services.scenarios.core.feedback import merge_observed_labels, relabel_with_decisions, relabel_with_predictions
from app.services.scenarios.core.scenario1_engine import top_ids
from app.services.scenarios.core.scenario2_engine import sliding_windows
from app.services.scenarios.run_scenarios import run_scenario1, run_scenario2, run_scenario2_detailed
from app.services.shared.exceptions import InsufficientTimeline, InvalidScenarioConfig
from tests.unit.conftest import make_dataset


def _toy_slice():
    labels = np.array([1, 0, 0, 1, 0, 0, 1, 0, 0, 0])
    groups = ["A", "B"] * 5
    return make_dataset(np.zeros((10, 2)), labels, groups=groups, months=[4] * 10)


def _abs_ratio(ratio: Log2Ratio) -> float:
    # 片方のFPRだけが0の場合は格差が最大とみなす
    return abs(ratio.value) if ratio.defined else math.inf


# ---------------------------------------------------------------------------
# フィードバック
# ---------------------------------------------------------------------------

def test_nothing_flagged_reveals_true_labels():
    ds = _toy_slice()
    relabeled, entry = relabel_with_decisions(ds, np.zeros(10, dtype=int), iteration=0)
    assert np.array_equal(relabeled.observed_labels, ds.true_labels)
    assert entry.relabeled_positive_ids == []
    assert len(entry.revealed_ids) == 10
    assert entry.month == 4


def test_everything_flagged_marks_all_positive():
    ds = _toy_slice()
    relabeled, entry = relabel_with_decisions(ds, np.ones(10, dtype=int), iteration=1)
    assert np.all(relabeled.observed_labels == 1)
    assert np.array_equal(relabeled.true_labels, ds.true_labels)
    assert entry.false_positive_count == 7
    assert entry.observed_positive_count == 10


def test_two_false_positives_add_two_observed_positives():
    ds = _toy_slice()
    decisions = np.array([1, 1, 0, 1, 0, 1, 0, 0, 0, 0])
    relabeled, entry = relabel_with_decisions(ds, decisions, iteration=0)
    assert entry.true_positive_count == 3
    assert entry.false_positive_count == 2
    assert entry.observed_positive_count == 5
    assert int(relabeled.observed_labels.sum()) == 5
    assert entry.relabeled_positive_ids == [0, 1, 3, 5]
    # 正例で見逃した行 (id=6) は真のラベルが判明する
    assert relabeled.observed_labels[6] == 1
    assert entry.observed_prevalence["B"] == pytest.approx(3 / 5)
    assert entry.true_prevalence["B"] == pytest.approx(1 / 5)


def test_relabel_with_predictions_uses_thresholds():
    ds = _toy_slice()
    model = train_logreg(ds, ModelConfig(algorithm="logreg", hyperparams={"max_iters": 0}))
    flag_all = FittedThresholds(kind=PolicyKind.GLOBAL, target_fpr=0.05, global_cutoff=0.5)
    flag_none = FittedThresholds(kind=PolicyKind.GLOBAL, target_fpr=0.05, global_cutoff=0.6)
    assert np.all(relabel_with_predictions(ds, model, flag_all)[0].observed_labels == 1)
    assert np.array_equal(relabel_with_predictions(ds, model, flag_none)[0].observed_labels, ds.true_labels)


def test_merge_only_touches_masked_rows():
    ds = make_dataset(np.zeros((6, 1)), [0, 0, 1, 0, 0, 0], months=[0, 0, 1, 1, 2, 2])
    mask = ds.months == 1
    relabeled, _ = relabel_with_decisions(ds.subset(mask), np.array([1, 1]), iteration=0)
    merged = merge_observed_labels(ds, mask, relabeled)
    assert merged.observed_labels.tolist() == [0, 0, 1, 1, 0, 0]
    assert np.array_equal(merged.true_labels, ds.true_labels)


# ---------------------------------------------------------------------------
# スライディングウィンドウ
# ---------------------------------------------------------------------------

def test_sliding_windows_accumulate_training_months():
    windows = sliding_windows(8, drop_old=False)
    assert [w.train_months for w in windows] == [[0, 1, 2], [0, 1, 2, 3], [0, 1, 2, 3, 4], [0, 1, 2, 3, 4, 5]]
    assert [w.validation_month for w in windows] == [3, 4, 5, 6]
    assert [w.test_month for w in windows] == [4, 5, 6, 7]


def test_sliding_windows_drop_old_keeps_three_months():
    windows = sliding_windows(8, drop_old=True)
    assert [w.train_months for w in windows] == [[0, 1, 2], [1, 2, 3], [2, 3, 4], [3, 4, 5]]


def test_short_timeline_is_rejected(tiny_experiment):
    with pytest.raises(InsufficientTimeline):
        sliding_windows(7, drop_old=False)
    config = tiny_experiment.model_copy(update={"base": BaseDataConfig(n=6_000, prevalence=0.03, d=4, n_months=7)})
    with pytest.raises(InsufficientTimeline):
        run_scenario2(config, seed=1)


# ---------------------------------------------------------------------------
# シナリオ2
# ---------------------------------------------------------------------------

def test_oracle_scorer_adds_no_noise(tiny_experiment):
    report = run_scenario2(tiny_experiment, seed=1, scorer_override=lambda ds: ds.true_labels.astype(float))
    for record in report.iterations:
        assert record.chosen_config_id == -1
        assert record.perceived.overall.fpr == 0.0
        assert record.real.overall.fpr == 0.0
    assert all(entry.false_positive_count == 0 for entry in report.ledger.entries)


def test_ledger_invariants(tiny_experiment):
    run = run_scenario2_detailed(tiny_experiment, seed=3)
    entries = run.report.ledger.entries
    assert [e.month for e in entries] == [4, 5, 6, 7]
    for entry in entries:
        assert entry.observed_positive_count == entry.true_positive_count + entry.false_positive_count

    # 各行が書き換えられるのは高々1回
    touched = [i for e in entries for i in e.relabeled_positive_ids + e.revealed_ids]
    assert len(touched) == len(set(touched))

    final = run.final_dataset
    clean = final.months <= 3
    assert np.array_equal(final.observed_labels[clean], final.true_labels[clean])
    assert np.array_equal(final.true_labels, run.initial_dataset.true_labels)
    assert len(run.selected_models) == 4


def test_perceived_fpr_respects_target(tiny_experiment):
    for kind in ("global", "groupwise"):
        policy = ThresholdPolicy(kind=kind, target_fpr=0.05)
        report = run_scenario2(tiny_experiment, seed=2, policy=policy)
        for record in report.iterations:
            assert record.perceived.overall.fpr <= 0.05
            if kind == "groupwise":
                assert all(fpr <= 0.05 for fpr in record.perceived_group_fpr.values())


def test_scenario2_is_deterministic(tiny_experiment):
    assert run_scenario2(tiny_experiment, seed=5) == run_scenario2(tiny_experiment, seed=5)


def test_drop_old_is_recorded(tiny_experiment):
    report = run_scenario2(tiny_experiment, seed=1, drop_old=True)
    assert report.drop_old
    assert report.iterations[-1].train_months == [3, 4, 5]


# ---------------------------------------------------------------------------
# シナリオ1
# ---------------------------------------------------------------------------

def test_disabled_shift_makes_adaptation_equal_ideal(tiny_experiment):
    config = tiny_experiment.model_copy(
        update={"scenario": ScenarioName.SCENARIO1, "bias": BiasSpec(dynamic_shift=DynamicShiftSpec())}
    )
    report = run_scenario1(config, seed=1)
    ideal = report.worlds[World.PERFORMANCE_IDEAL.value]
    adaptation = report.worlds[World.ADAPTATION.value]
    assert not report.shift_enabled
    assert adaptation.trials == ideal.trials
    assert adaptation.top_ids == ideal.top_ids
    assert set(report.worlds) == {w.value for w in World}


def test_scenario1_rejects_unequal_groups(tiny_experiment):
    config = tiny_experiment.model_copy(
        update={"scenario": ScenarioName.SCENARIO1, "bias": BiasSpec(prevalence_multiplier_c=2.0)}
    )
    with pytest.raises(InvalidScenarioConfig):
        run_scenario1(config, seed=1)


def test_top_ids_break_ties_by_config_id():
    ratio = Log2Ratio(value=0.0, defined=True)
    trials = [
        TrialResult(config_id=i, tpr=tpr, cutoff=0.5, log2_fpr_ratio=ratio)
        for i, tpr in enumerate([0.2, 0.5, 0.5, 0.1, 0.9, 0.3])
    ]
    assert top_ids(trials, k=3) == [4, 1, 2]
    assert top_ids(trials) == [4, 1, 2, 5, 0]


# ---------------------------------------------------------------------------
# 10シードでの傾向の再現
# ---------------------------------------------------------------------------

@pytest.fixture
def desk_experiment(tiny_experiment):
    return tiny_experiment.model_copy(
        update={"base": BaseDataConfig(n=20_000, prevalence=0.05, d=4, n_months=8), "n_trials": 5}
    )


@pytest.mark.slow
def test_adaptation_hurts_performance_and_fairness(desk_experiment):
    config = desk_experiment.model_copy(update={"scenario": ScenarioName.SCENARIO1})
    ideal_tpr, adaptation_tpr, adaptation_gap, baseline_gap = [], [], [], []
    for seed in range(1, 11):
        report = run_scenario1(config, seed)
        ideal = report.worlds[World.PERFORMANCE_IDEAL.value]
        adaptation = report.worlds[World.ADAPTATION.value]
        baseline = report.worlds[World.UNBIASED_BASELINE.value]
        ideal_tpr.append(statistics.median(ideal.trial(i).tpr for i in ideal.top_ids))
        adaptation_tpr.append(statistics.median(adaptation.trial(i).tpr for i in report.believed_top_ids))
        adaptation_gap.append(
            statistics.median(_abs_ratio(adaptation.trial(i).log2_fpr_ratio) for i in report.believed_top_ids)
        )
        baseline_gap.append(
            statistics.median(_abs_ratio(baseline.trial(i).log2_fpr_ratio) for i in baseline.top_ids)
        )
    assert statistics.median(adaptation_tpr) < statistics.median(ideal_tpr)
    assert statistics.median(adaptation_gap) > statistics.median(baseline_gap)


@pytest.mark.slow
def test_selective_labels_hide_real_fpr(desk_experiment):
    hidden = 0
    for seed in range(1, 11):
        report = run_scenario2(desk_experiment, seed)
        later = report.iterations[1:]
        if all(r.real.overall.fpr > r.perceived.overall.fpr for r in later):
            hidden += 1
        for entry in report.ledger.entries:
            assert entry.observed_positive_count == entry.true_positive_count + entry.false_positive_count
    assert hidden >= 8


# ---------------------------------------------------------------------------
# 既定規模（n=50,000・不正率1%）での10シード
# ---------------------------------------------------------------------------

SCENARIO2_SWEEP_BUDGET_SECONDS = 15 * 60


def _scenario2_sweep(config: ExperimentConfig) -> Tuple[List[Scenario2Report], float]:
    started = time.perf_counter()
    ExperimentRunnerService(config).run_scenarios()
    elapsed = time.perf_counter() - started
    out = Path(config.output_dir)
    reports = [
        Scenario2Report.model_validate_json(
            (out / SCENARIO2_REPORT_FILE.format(seed=seed)).read_text(encoding="utf-8")
        )
        for seed in config.seeds
    ]
    return reports, elapsed


def _real_to_perceived(record: IterationRecord) -> float:
    perceived = record.perceived.overall.fpr
    return record.real.overall.fpr / perceived if perceived else math.inf


@pytest.mark.slow
def test_default_scale_global_policy_real_fpr_grows(tmp_path):
    config = ExperimentConfig(n_trials=20, output_dir=str(tmp_path / "global"))
    reports, elapsed = _scenario2_sweep(config)
    target = config.policy.target_fpr

    assert elapsed < SCENARIO2_SWEEP_BUDGET_SECONDS
    above_cap = sum(all(r.real.overall.fpr > target for r in report.iterations[1:]) for report in reports)
    assert above_cap >= 8
    widening = sum(
        _real_to_perceived(report.iterations[3]) > _real_to_perceived(report.iterations[1]) for report in reports
    )
    assert widening >= 7
    assert statistics.median(report.iterations[3].real.overall.fpr for report in reports) > statistics.median(
        report.iterations[0].real.overall.fpr for report in reports
    )
    for report in reports:
        assert all(r.perceived.overall.fpr <= target for r in report.iterations)
        for entry in report.ledger.entries:
            assert entry.observed_positive_count == entry.true_positive_count + entry.false_positive_count


@pytest.mark.slow
def test_default_scale_groupwise_policy_gap_does_not_close(tmp_path):
    config = ExperimentConfig(
        algorithm="logreg",
        n_trials=20,
        policy=ThresholdPolicy(kind="groupwise"),
        output_dir=str(tmp_path / "groupwise"),
    )
    reports, _ = _scenario2_sweep(config)
    target = config.policy.target_fpr

    for report in reports:
        for record in report.iterations:
            for group, counts in record.perceived.counts.by_group.items():
                negatives = counts.fp + counts.tn
                fpr = record.perceived.by_group[group].fpr
                assert target - 1.0 / negatives - 1e-12 < fpr <= target + 1e-12
    not_closing = sum(
        _abs_ratio(report.iterations[3].real.log2_fpr_ratio) >= _abs_ratio(report.iterations[1].real.log2_fpr_ratio)
        for report in reports
    )
    assert not_closing > len(reports) // 2
