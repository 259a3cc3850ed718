import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ovrkit.metrics import (confusion, evaluate, instance_f1, macro_f1,
                            micro_f1, micro_upper_bound, multiclass_accuracy,
                            precision_at_k)


def oracle_confusion(truth, pred, n_labels):
    """Independent brute-force count over every (instance, label) pair."""
    tp = [0] * n_labels
    fp = [0] * n_labels
    fn = [0] * n_labels
    for j in range(n_labels):
        for t_row, p_row in zip(truth, pred):
            in_t, in_p = j in t_row, j in p_row
            if in_t and in_p:
                tp[j] += 1
            elif in_p:
                fp[j] += 1
            elif in_t:
                fn[j] += 1
    return tp, fp, fn


def oracle_macro(truth, pred, n_labels):
    tp, fp, fn = oracle_confusion(truth, pred, n_labels)
    per_label = []
    for j in range(n_labels):
        denom = 2 * tp[j] + fp[j] + fn[j]
        per_label.append(2 * tp[j] / denom if denom else 0.0)
    return sum(per_label) / n_labels


def oracle_micro(truth, pred, n_labels):
    tp, fp, fn = oracle_confusion(truth, pred, n_labels)
    denom = 2 * sum(tp) + sum(fp) + sum(fn)
    return 2 * sum(tp) / denom if denom else 0.0


def oracle_instance(truth, pred):
    terms = []
    for t_row, p_row in zip(truth, pred):
        inter = len(set(t_row) & set(p_row))
        denom = len(set(t_row)) + len(set(p_row))
        terms.append(2 * inter / denom if denom else 0.0)
    return math.fsum(terms) / len(truth)


def oracle_precision_at_k(truth, decisions, k):
    terms = []
    for t_row, row in zip(truth, decisions):
        ranked = sorted(range(len(row)), key=lambda j: (-row[j], j))
        terms.append(len(set(ranked[:k]) & set(t_row)) / k)
    return math.fsum(terms) / len(truth)


def random_sets(rng, n, n_labels):
    out = []
    for _ in range(n):
        members = [j for j in range(n_labels) if rng.random() < rng.uniform(0.1, 0.7)]
        out.append(tuple(members))
    return out


FIX_TRUTH = [(0,), (0, 1)]
FIX_PRED = [(0,), (0,)]


class TestConfusion:
    def test_hand_fixture(self):
        counts = confusion(FIX_TRUTH, FIX_PRED, n_labels=2)
        assert counts.tp == [2, 0]
        assert counts.fp == [0, 0]
        assert counts.fn == [0, 1]
        assert (counts.tp_sum, counts.fp_sum, counts.fn_sum) == (2, 0, 1)

    def test_perfect_prediction(self):
        counts = confusion(FIX_TRUTH, FIX_TRUTH, n_labels=2)
        assert counts.fp == [0, 0] and counts.fn == [0, 0]

    def test_all_empty_prediction(self):
        counts = confusion(FIX_TRUTH, [(), ()], n_labels=2)
        assert counts.tp == [0, 0]
        assert counts.fn == [2, 1]  # label frequencies

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            confusion(FIX_TRUTH, [(0,)], n_labels=2)


class TestF1Values:
    def test_macro_fixture(self):
        assert macro_f1(confusion(FIX_TRUTH, FIX_PRED, n_labels=2)) == 0.5

    def test_micro_fixture(self):
        assert micro_f1(confusion(FIX_TRUTH, FIX_PRED, n_labels=2)) == 0.8

    def test_instance_fixture(self):
        assert instance_f1(FIX_TRUTH, FIX_PRED) == pytest.approx(5 / 6)

    def test_perfect_scores_one(self):
        counts = confusion(FIX_TRUTH, FIX_TRUTH, n_labels=2)
        assert macro_f1(counts) == 1.0
        assert micro_f1(counts) == 1.0
        assert instance_f1(FIX_TRUTH, FIX_TRUTH) == 1.0

    def test_empty_predictions_score_zero(self):
        counts = confusion(FIX_TRUTH, [(), ()], n_labels=2)
        assert macro_f1(counts) == 0.0
        assert micro_f1(counts) == 0.0

    def test_disjoint_predictions_score_zero(self):
        assert instance_f1([(0,), (1,)], [(1,), (0,)]) == 0.0

    def test_macro_averages_over_full_vocabulary(self):
        # label 2 never occurs and is never predicted: contributes 0
        counts = confusion([(0,)], [(0,)], n_labels=3)
        assert macro_f1(counts) == pytest.approx(1 / 3)


class TestMicroUpperBound:
    def test_fixture(self):
        assert micro_upper_bound([2, 1], [1, 1]) == 0.8

    def test_matching_counts_reach_one(self):
        assert micro_upper_bound([3, 1, 2], [3, 1, 2]) == 1.0

    def test_all_zero_predictions(self):
        assert micro_upper_bound([2, 1], [0, 0]) == 0.0

    def test_all_zero_everything(self):
        assert micro_upper_bound([0, 0], [0, 0]) == 0.0

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            micro_upper_bound([1], [1, 2])


class TestMulticlassAccuracy:
    def test_fixture_matches_micro(self):
        truth = [(0,), (1,), (2,)]
        pred = [(0,), (1,), (0,)]
        acc = multiclass_accuracy(truth, pred)
        assert acc == pytest.approx(2 / 3)
        assert acc == micro_f1(confusion(truth, pred, n_labels=3))

    def test_all_correct_and_all_wrong(self):
        truth = [(0,), (1,)]
        assert multiclass_accuracy(truth, truth) == 1.0
        assert multiclass_accuracy(truth, [(1,), (0,)]) == 0.0

    def test_non_singleton_rejected(self):
        with pytest.raises(ValueError):
            multiclass_accuracy([(0, 1)], [(0,)])


class TestPrecisionAtK:
    def test_hit(self):
        assert precision_at_k([(0,)], np.array([[0.9, 0.1]]), 1) == 1.0

    def test_miss(self):
        assert precision_at_k([(1,)], np.array([[0.9, 0.1]]), 1) == 0.0

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            precision_at_k([(0,)], np.array([[0.9, 0.1]]), 3)

    def test_five_instance_fixture_matches_oracle(self):
        rng = np.random.default_rng(17)
        decisions = rng.normal(size=(5, 6))
        truth = random_sets(rng, 5, 6)
        for k in (1, 2, 3, 6):
            assert precision_at_k(truth, decisions, k) == \
                oracle_precision_at_k(truth, decisions, k)


class TestOracleEquivalence:
    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_f1_family_matches_brute_force(self, data):
        n = data.draw(st.integers(1, 20))
        nl = data.draw(st.integers(1, 6))
        truth = [tuple(sorted(data.draw(
            st.lists(st.integers(0, nl - 1), unique=True, max_size=nl))))
            for _ in range(n)]
        pred = [tuple(sorted(data.draw(
            st.lists(st.integers(0, nl - 1), unique=True, max_size=nl))))
            for _ in range(n)]
        counts = confusion(truth, pred, n_labels=nl)
        assert macro_f1(counts) == oracle_macro(truth, pred, nl)
        assert micro_f1(counts) == oracle_micro(truth, pred, nl)
        assert instance_f1(truth, pred) == oracle_instance(truth, pred)

    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_micro_bounded_and_permutation_invariant(self, data):
        n = data.draw(st.integers(2, 15))
        nl = data.draw(st.integers(1, 5))
        truth = [tuple(sorted(data.draw(
            st.lists(st.integers(0, nl - 1), unique=True, max_size=nl))))
            for _ in range(n)]
        pred = [tuple(sorted(data.draw(
            st.lists(st.integers(0, nl - 1), unique=True, max_size=nl))))
            for _ in range(n)]
        counts = confusion(truth, pred, n_labels=nl)
        micro = micro_f1(counts)
        bound = micro_upper_bound([len(t) for t in truth], [len(p) for p in pred])
        assert micro <= bound + 1e-12
        for value in (micro, macro_f1(counts), instance_f1(truth, pred), bound):
            assert 0.0 <= value <= 1.0
        perm = data.draw(st.permutations(range(n)))
        truth_p = [truth[i] for i in perm]
        pred_p = [pred[i] for i in perm]
        counts_p = confusion(truth_p, pred_p, n_labels=nl)
        assert micro_f1(counts_p) == micro
        assert macro_f1(counts_p) == macro_f1(counts)
        assert instance_f1(truth_p, pred_p) == instance_f1(truth, pred)


class TestEvaluate:
    def test_full_report(self):
        rng = np.random.default_rng(2)
        decisions = rng.normal(size=(2, 2))
        rep = evaluate(FIX_TRUTH, FIX_PRED, n_labels=2, decisions=decisions, k=1)
        assert rep.macro_f1 == 0.5
        assert rep.micro_f1 == 0.8
        assert rep.instance_f1 == pytest.approx(5 / 6)
        assert rep.bound_satisfied()
        assert rep.n_test == 2
        assert rep.precision_at_k is not None

    def test_accuracy_only_for_singletons(self):
        rep = evaluate([(0,), (1,)], [(0,), (0,)], n_labels=2)
        assert rep.accuracy_multiclass == 0.5
        rep2 = evaluate(FIX_TRUTH, FIX_PRED, n_labels=2)
        assert rep2.accuracy_multiclass is None

    def test_json_round_trip_is_flat(self):
        import json
        rep = evaluate(FIX_TRUTH, FIX_PRED, n_labels=2)
        doc = json.loads(rep.to_json())
        assert doc["micro_f1"] == 0.8
        assert all(not isinstance(v, (dict, list)) for v in doc.values())

    def test_bound_invariant_recorded(self):
        rep = evaluate(FIX_TRUTH, FIX_PRED, n_labels=2)
        assert rep.micro_f1 <= rep.micro_upper_bound + 1e-12
