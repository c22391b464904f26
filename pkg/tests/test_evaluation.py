import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from painmil.evaluation import (
    ConsistencyRow,
    auc,
    coder_group,
    confusion_counts,
    consistency_rate,
    cross_validate,
    kfold,
    roc_points,
    score_metrics,
)
from painmil.exceptions import ConfigError, InvalidInputError, MismatchError, UndefinedMetricError
from painmil.milboost import MILBoostClassifier


def pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l != 1]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestAUC:
    def test_perfect_and_reversed(self):
        y = [-1, -1, 1, 1]
        assert auc([0.1, 0.2, 0.8, 0.9], y) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], y) == 0.0

    def test_ties_half(self):
        assert auc([0.5, 0.5], [1, -1]) == 0.5

    def test_random_fifty_against_pairwise(self):
        rng = np.random.default_rng(0)
        s = np.round(rng.random(50), 1)
        y = np.where(rng.random(50) < 0.4, 1, -1)
        assert abs(auc(s, y) - pairwise_auc(s, y)) <= 1e-12

    @given(st.integers(0, 100_000), st.integers(2, 200))
    def test_matches_pairwise(self, seed, n):
        rng = np.random.default_rng(seed)
        s = np.round(rng.random(n), int(rng.integers(1, 4)))
        y = np.where(rng.random(n) < 0.5, 1, -1)
        y[0], y[1] = 1, -1
        assert abs(auc(s, y) - pairwise_auc(s, y)) <= 1e-12

    def test_one_class(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            auc([0.1], [1, -1])

    def test_roc_points(self):
        fpr, tpr, thr = roc_points([0.1, 0.4, 0.35, 0.8], [-1, -1, 1, 1])
        assert fpr[0] == 0 and tpr[-1] == 1 and fpr[-1] == 1
        assert np.trapezoid(tpr, fpr) == pytest.approx(auc([0.1, 0.4, 0.35, 0.8], [-1, -1, 1, 1]))


class TestKFold:
    def test_fold_sizes_147(self):
        y = np.where(np.arange(147) < 60, 1, -1)
        folds = kfold(y, 10, seed=3)
        assert sorted({len(te) for _, te in folds}) == [14, 15]

    @given(st.integers(0, 1000), st.integers(2, 10), st.booleans())
    def test_partition(self, seed, k, stratified):
        y = np.where(np.random.default_rng(seed).random(40) < 0.5, 1, -1)
        y[:10] = 1
        y[10:20] = -1
        folds = kfold(y, k, seed, stratified)
        tests = np.concatenate([te for _, te in folds])
        assert sorted(tests) == list(range(40))
        for tr, te in folds:
            assert np.intersect1d(tr, te).size == 0
            assert len(tr) + len(te) == 40

    def test_stratified_balance(self):
        y = np.array([1] * 30 + [-1] * 70)
        for _, te in kfold(y, 10, 0):
            assert (y[te] == 1).sum() == 3

    def test_deterministic(self):
        y = np.tile([1, -1], 25)
        a, b = kfold(y, 5, 42), kfold(y, 5, 42)
        for (tra, tea), (trb, teb) in zip(a, b):
            np.testing.assert_array_equal(tea, teb)

    def test_too_many_folds(self):
        with pytest.raises(ConfigError):
            kfold([1, -1, 1], 4)

    @pytest.mark.parametrize("stratified", [True, False])
    def test_groups_stay_together(self, stratified):
        groups = np.repeat(np.arange(12), 4)
        y = np.where(np.arange(48) % 3 == 0, 1, -1)
        for _, te in kfold(y, 4, 0, stratified, groups):
            for g in np.unique(groups[te]):
                assert set(np.flatnonzero(groups == g)) <= set(te)

    def test_too_few_groups(self):
        with pytest.raises(ConfigError):
            kfold(np.tile([1, -1], 5), 5, groups=np.repeat([0, 1], 5))


class TestMetrics:
    def test_confusion_sums(self):
        conf = confusion_counts([1, 1, -1, -1, 1], [1, -1, -1, 1, 1])
        assert conf == {"tp": 2, "fp": 1, "tn": 1, "fn": 1}

    def test_threshold_is_strict(self):
        m = score_metrics([0.5, 0.9], [-1, 1])
        assert m.confusion == {"tp": 1, "fp": 0, "tn": 1, "fn": 0}
        assert m.accuracy == 1.0 and m.n == 2

    def test_undefined_auc_is_nan(self):
        assert np.isnan(score_metrics([0.2, 0.7], [1, 1]).auc)

    def test_cross_validation(self, compact_bags):
        X = [b.instances for b in compact_bags]
        y = np.array([b.label for b in compact_bags])
        cv = cross_validate(MILBoostClassifier(n_rounds=5), X, y, k=4, seed=1)
        assert cv.metrics.n == len(X)
        assert len(cv.metrics.per_fold) == 4
        assert np.all(np.isfinite(cv.scores))
        assert sorted(set(cv.fold_of)) == [0, 1, 2, 3]
        assert cv.metrics.auc == auc(cv.scores, y)
        assert len(cv.localization) == len(X)
        again = cross_validate(MILBoostClassifier(n_rounds=5), X, y, k=4, seed=1)
        np.testing.assert_array_equal(cv.scores, again.scores)


class TestConsistency:
    def test_groups(self):
        assert [coder_group(c) for c in (0, 1, 2, 3)] == ["0", "1", "2+", "2+"]
        with pytest.raises(InvalidInputError):
            coder_group(4)

    def test_two_coder_rate(self):
        coders = {f"s{i}": 2 for i in range(82)}
        preds = {f"s{i}": 1 if i < 68 else -1 for i in range(82)}
        table = consistency_rate(preds, coders)
        assert (table["2+"].agree, table["2+"].total) == (68, 82)
        assert round(100 * table["2+"].rate, 1) == 82.9

    def test_all_agree(self):
        coders = {"a": 3, "b": 1, "c": 0}
        table = consistency_rate({"a": 1, "b": 1, "c": -1}, coders)
        assert all(r.rate == 1.0 for r in table.values())

    def test_hand_counted(self):
        coders = {"a": 2, "b": 3, "c": 1, "d": 1, "e": 0, "f": 0, "g": 0}
        preds = {"a": 1, "b": -1, "c": 1, "d": 1, "e": 1, "f": -1, "g": -1}
        table = consistency_rate(preds, coders)
        assert table["2+"] == ConsistencyRow(1, 2)
        assert table["1"] == ConsistencyRow(2, 2)
        assert table["0"] == ConsistencyRow(2, 3)

    def test_missing_prediction(self):
        with pytest.raises(MismatchError):
            consistency_rate({"a": 1}, {"a": 2, "b": 0})

    def test_empty_group_rate_nan(self):
        assert np.isnan(ConsistencyRow(0, 0).rate)
