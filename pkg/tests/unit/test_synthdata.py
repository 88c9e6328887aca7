import math

import numpy as np
import pytest
from scipy import stats
from sklearn.metrics import roc_auc_score

from app.schemas.schemas import (
    BaseDataConfig,
    BiasSpec,
    Condition,
    DynamicShiftSpec,
    GaussianComponent,
    LabelGroupComponent,
    ModelConfig,
    NoiseMode,
)
from app.services.fairmetrics.core.metrics_engine import tpr_at_fpr
from app.services.learners.train_model import predict_scores, train_logreg
from app.services.scenarios.config.scenario_config import default_scenario1_bias
from app.services.shared.exceptions import (
    DegenerateGroupShare,
    EmptyOrDegenerateConfig,
    GroupsNotAttached,
    InfeasibleDisparity,
    InvalidCovariance,
    InvalidShiftWindow,
    MissingConditionalFeatures,
)
from app.services.synthdata.build_dataset import build_biased_dataset
from app.services.synthdata.core.dataset import load_dataset, save_dataset
from app.services.synthdata.core.generator_engine import attach_protected, gen_base, positive_count
from app.services.synthdata.core.injection_engine import (
    apply_dynamic_shift,
    check_component,
    inject_class_conditional_bias,
    inject_noisy_labels,
    inject_prevalence_disparity,
    noisy_flip_count,
)
from app.services.synthdata.core.verification_engine import verify_bias_conditions
from tests.unit.conftest import balanced_label_dataset


def _conditional_bias(share: float = 0.5) -> BiasSpec:
    bias = default_scenario1_bias(8)
    return bias.model_copy(update={"group_share_A": share, "dynamic_shift": None})


# ---------------------------------------------------------------------------
# gen_base / attach_protected
# ---------------------------------------------------------------------------

def test_gen_base_has_exact_positive_count():
    ds = gen_base(50_000, 0.01, 8, 8, seed=7)
    assert int(ds.true_labels.sum()) == 500
    assert ds.d == 8
    assert ds.prevalence == pytest.approx(0.01)
    assert np.array_equal(ds.observed_labels, ds.true_labels)
    assert ds.months.min() >= 0 and ds.months.max() < 8
    assert np.unique(ds.ids).size == ds.n_instances


@pytest.mark.parametrize("n,prevalence", [(1234, 0.05), (999, 0.015), (20_001, 0.0125)])
def test_gen_base_positive_count_rounds_half_up(n, prevalence):
    ds = gen_base(n, prevalence, 2, 2, seed=1)
    assert int(ds.true_labels.sum()) == positive_count(n, prevalence)
    assert positive_count(n, prevalence) == math.floor(n * prevalence + 0.5)


def test_gen_base_rejects_empty_config():
    with pytest.raises(EmptyOrDegenerateConfig):
        gen_base(0, 0.01, 8, 8, seed=1)
    with pytest.raises(EmptyOrDegenerateConfig):
        gen_base(1000, 0.1, 1, 8, seed=1)


def test_gen_base_is_deterministic():
    assert gen_base(5000, 0.02, 4, 8, seed=3).equals(gen_base(5000, 0.02, 4, 8, seed=3))
    assert not gen_base(5000, 0.02, 4, 8, seed=3).equals(gen_base(5000, 0.02, 4, 8, seed=4))


def test_linear_model_partially_separates_base_data():
    config = ModelConfig(algorithm="logreg", hyperparams={"learning_rate": 0.5, "max_iters": 300})
    for seed in range(1, 11):
        ds = gen_base(50_000, 0.01, 8, 8, seed=seed)
        cut = int(0.7 * ds.n_instances)
        train = ds.subset(np.arange(ds.n_instances) < cut)
        test = ds.subset(np.arange(ds.n_instances) >= cut)
        model = train_logreg(train, config)
        tpr = tpr_at_fpr(predict_scores(model, test), test.true_labels, 0.05)
        assert 0.2 < tpr < 0.9, f"seed={seed} tpr={tpr}"


def test_attach_protected_degenerate_share():
    ds = gen_base(2000, 0.05, 2, 2, seed=1)
    all_a = attach_protected(ds, 1.0, seed=2, allow_degenerate=True)
    assert set(all_a.group_labels().tolist()) == {"A"}
    with pytest.raises(DegenerateGroupShare):
        attach_protected(ds, 1.0, seed=2)


def test_attach_protected_balanced_share_within_binomial_bound():
    ds = attach_protected(gen_base(50_000, 0.01, 2, 2, seed=5), 0.5, seed=6)
    count_a = int(ds.group_mask("A").sum())
    assert abs(count_a - 25_000) <= 4 * math.sqrt(50_000 * 0.25)


def test_attach_protected_is_independent_of_labels():
    for seed in range(10):
        ds = attach_protected(gen_base(50_000, 0.01, 2, 2, seed=seed), 0.5, seed=seed + 100)
        r = np.corrcoef(ds.group_mask("B").astype(float), ds.true_labels.astype(float))[0, 1]
        assert abs(r) <= 4 / math.sqrt(ds.n_instances)


def test_attach_protected_changes_only_the_group_column():
    ds = gen_base(5000, 0.02, 3, 8, seed=4)
    attached = attach_protected(ds, 0.3, seed=5)
    for name in ("ids", "months", "true_labels", "observed_labels", "features"):
        assert np.array_equal(getattr(attached, name), getattr(ds, name))

    # ラベルと特徴量を並べ替えてから付与しても割り当ては同じ
    perm = np.random.default_rng(6).permutation(ds.n_instances)
    shuffled = ds.evolve(
        true_labels=ds.true_labels[perm],
        observed_labels=ds.observed_labels[perm],
        features=ds.features[perm],
    )
    assert np.array_equal(attach_protected(shuffled, 0.3, seed=5).groups, attached.groups)


# ---------------------------------------------------------------------------
# inject_prevalence_disparity
# ---------------------------------------------------------------------------

def test_prevalence_disparity_noop_for_unit_ratio():
    ds = attach_protected(gen_base(5000, 0.02, 2, 2, seed=1), 0.5, seed=2)
    assert inject_prevalence_disparity(ds, 1.0, seed=3) is ds


def test_prevalence_disparity_reaches_target_ratio():
    ds = attach_protected(gen_base(50_000, 0.01, 2, 2, seed=1), 0.5, seed=2)
    biased = inject_prevalence_disparity(ds, 2.0, seed=3)

    in_a, in_b = biased.group_mask("A"), biased.group_mask("B")
    ratio = biased.true_labels[in_a].mean() / biased.true_labels[in_b].mean()
    assert 1.9 <= ratio <= 2.1
    # グループサイズ・ラベル・特徴量は保存される
    assert int(in_a.sum()) == int(ds.group_mask("A").sum())
    assert np.array_equal(biased.true_labels, ds.true_labels)
    assert np.array_equal(biased.features, ds.features)
    assert biased.has_condition(Condition.PREVALENCE_DISPARITY)


def test_prevalence_disparity_infeasible_ratio():
    ds = attach_protected(gen_base(5000, 0.01, 2, 2, seed=1), 0.5, seed=2)
    with pytest.raises(InfeasibleDisparity):
        inject_prevalence_disparity(ds, 10_000.0, seed=3)


def test_prevalence_disparity_requires_groups():
    with pytest.raises(GroupsNotAttached):
        inject_prevalence_disparity(gen_base(5000, 0.02, 2, 2, seed=1), 2.0, seed=3)


def test_prevalence_disparity_restricted_to_months():
    ds = attach_protected(gen_base(50_000, 0.02, 2, 8, seed=1), 0.5, seed=2)
    biased = inject_prevalence_disparity(ds, 2.0, seed=3, months=[0, 1, 2])
    outside = ~np.isin(ds.months, [0, 1, 2])
    assert np.array_equal(biased.groups[outside], ds.groups[outside])


# ---------------------------------------------------------------------------
# inject_class_conditional_bias
# ---------------------------------------------------------------------------

def test_class_conditional_separability_by_group(small_base):
    ds = build_biased_dataset(small_base, _conditional_bias(), seed=3)
    x1, x2 = ds.conditional_columns
    score = ds.features[:, x1] + ds.features[:, x2]
    in_a, in_b = ds.group_mask("A"), ds.group_mask("B")

    assert 0.45 <= roc_auc_score(ds.true_labels[in_a], score[in_a]) <= 0.55
    assert roc_auc_score(ds.true_labels[in_b], score[in_b]) >= 0.95
    assert ds.d == small_base.d + 2


def test_identical_components_are_not_flagged_as_bias(small_base):
    same = GaussianComponent(mean=(0.0, 0.0), cov=((1.0, 0.0), (0.0, 1.0)))
    bias = BiasSpec(
        cond_dist=[LabelGroupComponent(label=y, group=g, component=same) for y in (0, 1) for g in ("A", "B")]
    )
    ds = build_biased_dataset(small_base, bias, seed=4)
    entry = verify_bias_conditions(ds, alpha=1e-3).entry(Condition.CLASS_CONDITIONAL)
    assert entry.detail["declared_biased"] is False
    assert entry.rejected is False
    assert entry.passed


def test_invalid_covariance_is_rejected():
    with pytest.raises(InvalidCovariance):
        check_component(GaussianComponent(mean=(0.0, 0.0), cov=((1.0, 2.0), (2.0, 1.0))))
    with pytest.raises(InvalidCovariance):
        check_component(GaussianComponent(mean=(0.0, 0.0), cov=((1.0, 0.5), (0.0, 1.0))))


def test_class_conditional_requires_groups():
    ds = gen_base(2000, 0.05, 2, 2, seed=1)
    bias = _conditional_bias()
    with pytest.raises(GroupsNotAttached):
        inject_class_conditional_bias(ds, bias.component_map(), seed=1)


# ---------------------------------------------------------------------------
# inject_noisy_labels
# ---------------------------------------------------------------------------

def test_inflate_to_unit_ratio_on_balanced_data_flips_nothing():
    ds = balanced_label_dataset(10, 10)
    noisy = inject_noisy_labels(ds, NoiseMode.INFLATE, 1.0, "A", seed=1)
    assert np.array_equal(noisy.observed_labels, ds.observed_labels)
    assert noisy.provenance_entries(Condition.NOISY_LABELS)[-1].params["flips"] == 0
    assert noisy_flip_count(NoiseMode.INFLATE, 1.0, 250, 25_000, 250, 25_000) == 0


def test_inflate_doubles_observed_prevalence_of_affected_group():
    ds = balanced_label_dataset(10, 10)
    noisy = inject_noisy_labels(ds, NoiseMode.INFLATE, 2.0, "A", seed=1)

    in_a, in_b = noisy.group_mask("A"), noisy.group_mask("B")
    ratio = noisy.observed_labels[in_a].mean() / noisy.observed_labels[in_b].mean()
    assert 1.9 <= ratio <= 2.1

    flipped = noisy.observed_labels != noisy.true_labels
    assert flipped.sum() == 10
    assert np.all(noisy.group_labels()[flipped] == "A")
    assert np.all(noisy.true_labels[flipped] == 0)
    assert np.all(noisy.observed_labels[flipped] == 1)
    assert np.array_equal(noisy.true_labels, ds.true_labels)
    assert verify_bias_conditions(noisy).entry(Condition.NOISY_LABELS).passed


def test_equalize_removes_observed_disparity():
    ds = balanced_label_dataset(20, 10)
    noisy = inject_noisy_labels(ds, NoiseMode.EQUALIZE, 1.0, "A", seed=1)
    in_a, in_b = noisy.group_mask("A"), noisy.group_mask("B")
    ratio = noisy.observed_labels[in_a].mean() / noisy.observed_labels[in_b].mean()
    assert abs(ratio - 1.0) <= 0.05
    flipped = noisy.observed_labels != noisy.true_labels
    assert np.all(noisy.true_labels[flipped] == 1)


def test_noisy_labels_on_c2_dataset_equalizes_within_tolerance():
    base = BaseDataConfig(n=50_000, prevalence=0.01, d=2, n_months=2)
    ds = build_biased_dataset(base, BiasSpec(prevalence_multiplier_c=2.0), seed=2)
    noisy = inject_noisy_labels(ds, NoiseMode.EQUALIZE, 1.0, "A", seed=3)
    in_a, in_b = noisy.group_mask("A"), noisy.group_mask("B")
    ratio = noisy.observed_labels[in_a].mean() / noisy.observed_labels[in_b].mean()
    assert abs(ratio - 1.0) <= 0.05


# ---------------------------------------------------------------------------
# apply_dynamic_shift
# ---------------------------------------------------------------------------

def test_empty_shift_window_returns_input(small_base):
    ds = build_biased_dataset(small_base, _conditional_bias(), seed=1)
    assert apply_dynamic_shift(ds, DynamicShiftSpec(shift_months=[]), seed=2) is ds


def test_dynamic_shift_is_idempotent_for_fixed_seed(small_base):
    ds = build_biased_dataset(small_base, _conditional_bias(), seed=3)
    spec = DynamicShiftSpec(shift_months=[6, 7])
    once = apply_dynamic_shift(ds, spec, seed=4)
    assert not once.equals(ds)
    assert apply_dynamic_shift(once, spec, seed=4).equals(once)


def test_default_shift_makes_conditional_features_uninformative(small_base):
    unshifted = build_biased_dataset(small_base, _conditional_bias(), seed=8)
    shifted = build_biased_dataset(small_base, default_scenario1_bias(small_base.n_months), seed=8)
    x1 = shifted.conditional_columns[0]
    in_window = shifted.group_mask("B") & np.isin(shifted.months, [6, 7])

    legit = shifted.features[in_window & (shifted.true_labels == 0), x1]
    fraud = shifted.features[in_window & (shifted.true_labels == 1), x1]
    assert stats.ks_2samp(legit, fraud).pvalue >= 0.01

    # 対象外の行は1行も変わらない
    assert np.array_equal(shifted.features[~in_window], unshifted.features[~in_window])


def test_shift_requires_conditional_features():
    ds = attach_protected(gen_base(2000, 0.05, 2, 8, seed=1), 0.5, seed=2)
    with pytest.raises(MissingConditionalFeatures):
        apply_dynamic_shift(ds, DynamicShiftSpec(shift_months=[6, 7]), seed=3)


def test_shift_window_must_fit_timeline(small_base):
    ds = build_biased_dataset(small_base, _conditional_bias(), seed=1)
    with pytest.raises(InvalidShiftWindow):
        apply_dynamic_shift(ds, DynamicShiftSpec(shift_months=[7, 8]), seed=2)


# ---------------------------------------------------------------------------
# verify_bias_conditions
# ---------------------------------------------------------------------------

def test_raw_base_has_no_verification_entries():
    report = verify_bias_conditions(gen_base(5000, 0.02, 2, 2, seed=1))
    assert report.entries == []
    assert report.all_passed


def test_independence_passes_for_random_groups():
    passes = 0
    for seed in range(10):
        ds = attach_protected(gen_base(5000, 0.01, 2, 2, seed=seed), 0.5, seed=seed + 50)
        passes += verify_bias_conditions(ds, alpha=0.01).entry(Condition.GROUP_INDEPENDENCE).passed
    assert passes >= 9


@pytest.mark.parametrize("c", [1.5, 2.0, 4.0])
def test_prevalence_disparity_is_detected(c):
    base = BaseDataConfig(n=50_000, prevalence=0.01, d=2, n_months=2)
    ds = build_biased_dataset(base, BiasSpec(prevalence_multiplier_c=c), seed=1)
    entry = verify_bias_conditions(ds, alpha=0.01).entry(Condition.PREVALENCE_DISPARITY)
    assert entry.detail["ratio_within_tolerance"]
    assert entry.rejected
    assert entry.passed


def test_shifted_dataset_verification(small_base):
    ds = build_biased_dataset(small_base, default_scenario1_bias(small_base.n_months), seed=5)
    report = verify_bias_conditions(ds)
    assert report.entry(Condition.CLASS_CONDITIONAL).passed
    assert report.entry(Condition.DYNAMIC_SHIFT).rejected


# ---------------------------------------------------------------------------
# build / serialize
# ---------------------------------------------------------------------------

def test_build_biased_dataset_is_deterministic(small_base):
    bias = default_scenario1_bias(small_base.n_months)
    assert build_biased_dataset(small_base, bias, seed=9).equals(build_biased_dataset(small_base, bias, seed=9))


def test_saved_dataset_reloads_with_provenance(tmp_path, small_base):
    ds = build_biased_dataset(small_base, default_scenario1_bias(small_base.n_months), seed=2)
    csv_path, sidecar = save_dataset(ds, tmp_path / "dataset.csv")
    assert sidecar.exists()
    header = csv_path.read_text(encoding="utf-8").splitlines()[0].split(",")
    assert header[:5] == ["id", "month", "group", "true_label", "observed_label"]

    loaded = load_dataset(csv_path)
    assert loaded.conditional_columns == ds.conditional_columns
    assert loaded.provenance == ds.provenance
    assert np.array_equal(loaded.observed_labels, ds.observed_labels)
    assert np.array_equal(loaded.features, ds.features)
    assert loaded.equals(ds)
