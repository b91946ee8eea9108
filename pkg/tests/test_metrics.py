"""
Tests for core/metrics.py - PIE, Q-Score, PD-Score and accuracy statistics.
"""

import pytest
import numpy as np
import pandas as pd
import math
from collections import Counter

from prune_lab.core.metrics import (
    PieRecord, modal_class, identify_pies, qscore, qscores, knn_predict, pd_score,
    per_class_pie_distribution, pie_overlap, accuracy_stats,
)
from prune_lab.core.errors import CohortError, DegenerateRepresentationError, ParameterError


def make_log(predictions, true_labels=None):
    """predictions[m][i] is the class model m predicts for sample i."""
    rows = []
    for m, preds in enumerate(predictions):
        for i, p in enumerate(preds):
            rows.append({"model_id": m, "method": "Sup", "pruning": "None", "sparsity": 0.0,
                         "sample_id": i, "predicted_class": int(p),
                         "true_label": int(true_labels[i]) if true_labels is not None else 0})
    return pd.DataFrame(rows)


def oracle_modal(values):
    counts = Counter(values)
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def oracle_knn(train, labels, q, k):
    table = sorted((float(np.sum((t - q) ** 2)), i) for i, t in enumerate(train))
    votes = Counter(int(labels[i]) for _, i in table[:k])
    return oracle_modal(list(votes.elements()))


class TestModalClass:
    """Test suite for modal_class."""

    def test_majority(self):
        assert modal_class([1, 1, 2]) == 1

    def test_tie_lowest(self):
        assert modal_class([0, 1]) == 0
        assert modal_class([3, 2, 3, 2]) == 2

    def test_single(self):
        assert modal_class([3]) == 3

    def test_empty(self):
        with pytest.raises(ParameterError):
            modal_class([])

    def test_order_invariant(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 4, size=9)
        assert modal_class(preds) == modal_class(rng.permutation(preds))


class TestPies:
    """Test suite for identify_pies."""

    def test_identical_cohorts(self):
        log = make_log([[0, 1, 2], [0, 1, 1]])
        assert not any(r.is_pie for r in identify_pies(log, log))

    def test_hand_counted(self):
        dense = make_log([[0], [0], [1]])
        pruned = make_log([[1], [1], [0]])
        record = identify_pies(dense, pruned)[0]
        assert (record.modal_dense, record.modal_pruned, record.is_pie) == (0, 1, True)

    def test_sample_mismatch(self):
        dense = make_log([[0, 1, 2]])
        pruned = make_log([[0, 1]])
        with pytest.raises(CohortError) as info:
            identify_pies(dense, pruned)
        assert info.value.ids == [2]

    def test_duplicate_pairs_rejected(self):
        log = make_log([[0, 1]])
        with pytest.raises(CohortError):
            identify_pies(pd.concat([log, log]), log)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        models, samples, classes = rng.integers(1, 11), rng.integers(1, 101), rng.integers(2, 6)
        dense = rng.integers(0, classes, size=(models, samples))
        pruned = rng.integers(0, classes, size=(rng.integers(1, 11), samples))
        records = identify_pies(make_log(dense), make_log(pruned))
        expected = [oracle_modal(dense[:, i].tolist()) != oracle_modal(pruned[:, i].tolist())
                    for i in range(samples)]
        assert [r.is_pie for r in records] == expected
        swapped = identify_pies(make_log(pruned), make_log(dense))
        assert [r.is_pie for r in swapped] == expected


class TestQScore:
    """Test suite for qscore."""

    def test_one_hot_oracle(self):
        record = qscore([1.0, 0.0, 0.0, 0.0])
        assert abs(record.z - math.sqrt(3)) < 1e-9
        assert abs(record.l1 - 1.0) < 1e-12
        assert abs(record.q - math.sqrt(3)) < 1e-9

    @pytest.mark.parametrize("seed", range(100))
    def test_scale_invariance_and_bounds(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=int(rng.integers(2, 20)))
        a, b = qscore(h), qscore(rng.uniform(0.1, 50.0) * h)
        assert abs(a.q - b.q) < 1e-9
        assert abs(a.q - a.z / a.l1) < 1e-9
        assert 1.0 - 1e-12 <= a.l1 <= math.sqrt(len(h)) + 1e-12

    @pytest.mark.parametrize("h", [[0.0, 0.0, 0.0], [2.0, 2.0, 2.0]])
    def test_degenerate(self, h):
        with pytest.raises(DegenerateRepresentationError):
            qscore(h)

    def test_qscores_skip_degenerate(self, caplog):
        records, skipped = qscores(np.array([[1.0, 0.0], [0.0, 0.0], [0.5, 0.2]]), [10, 11, 12])
        assert skipped == 1
        assert [r.sample_id for r in records] == [10, 12]
        assert "skipped 1" in caplog.text


class TestPdScore:
    """Test suite for knn_predict and pd_score."""

    def test_hand_placed(self):
        # probe 1: query sits next to a class-1 point; probe 2: next to class 0
        labels = np.array([0, 0, 1, 1])
        train_1 = np.array([[0.0], [1.0], [2.0], [3.0]])
        train_2 = np.array([[0.0], [1.0], [10.0], [11.0]])
        query_1, query_2 = np.array([[2.1]]), np.array([[0.4]])
        records = pd_score([train_1, train_2], labels, [query_1, query_2], [0], k=1)
        assert records[0].depth == 2

    def test_all_correct_and_none_correct(self):
        train = [np.array([[0.0], [5.0]])] * 3
        labels = [0, 1]
        query = [np.array([[0.1], [4.9]])] * 3
        assert [r.depth for r in pd_score(train, labels, query, [0, 1], k=1)] == [1, 1]
        assert [r.depth for r in pd_score(train, labels, query, [1, 0], k=1)] == [4, 4]

    def test_parameter_errors(self):
        train = [np.zeros((2, 1))]
        with pytest.raises(ParameterError):
            pd_score(train, [0, 1], [np.zeros((1, 1))], [0], k=0)
        with pytest.raises(ParameterError):
            pd_score([np.zeros((0, 1))], [], [np.zeros((1, 1))], [0], k=1)

    def test_neighbour_ties_by_index(self):
        train = np.array([[1.0], [-1.0]])
        assert knn_predict(train, [1, 0], np.array([[0.0]]), k=1)[0] == 1

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        probes = int(rng.integers(1, 4))
        n_train, n_query, classes = int(rng.integers(5, 31)), int(rng.integers(1, 10)), 3
        k = int(rng.choice([1, 3, 5]))
        labels = rng.integers(0, classes, size=n_train)
        qlabels = rng.integers(0, classes, size=n_query)
        train = [rng.normal(size=(n_train, 2)) for _ in range(probes)]
        query = [rng.normal(size=(n_query, 2)) for _ in range(probes)]

        records = pd_score(train, labels, query, qlabels, k=k)
        for j, record in enumerate(records):
            correct = [oracle_knn(train[d], labels, query[d][j], k) == qlabels[j] for d in range(probes)]
            depth = probes + 1
            for d in range(probes, 0, -1):
                if not all(correct[d - 1:]):
                    break
                depth = d
            assert record.depth == depth

    def test_relabel_invariance(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 3, size=20)
        qlabels = rng.integers(0, 3, size=6)
        train = [rng.normal(size=(20, 2)) for _ in range(2)]
        query = [rng.normal(size=(6, 2)) for _ in range(2)]
        perm = np.array([2, 0, 1])
        a = pd_score(train, labels, query, qlabels, k=1)
        b = pd_score(train, perm[labels], query, perm[qlabels], k=1)
        assert [r.depth for r in a] == [r.depth for r in b]


class TestDistributions:
    """Test suite for per-class counts, overlaps and accuracy statistics."""

    def records(self, pies, labels):
        return [PieRecord(i, 0, 1 if i in pies else 0, i in pies, labels[i]) for i in range(len(labels))]

    def test_per_class_distribution(self):
        labels = [0, 1, 2, 2, 2, 2, 1, 0, 3, 3]
        counts = per_class_pie_distribution(self.records({2, 3, 5}, labels), 4)
        assert counts.tolist() == [0, 0, 3, 0]
        assert per_class_pie_distribution(self.records(set(), labels), 4).tolist() == [0, 0, 0, 0]

    def test_overlap(self):
        labels = [0, 1, 0, 1, 0]
        a = self.records({0, 1, 2}, labels)
        b = self.records({2, 3}, labels)
        result = pie_overlap(a, b, 2)
        assert result.shared == [2]
        assert result.unique_a == [0, 1] and result.unique_b == [3]
        assert result.per_class_shared.tolist() == [1, 0]
        assert len(result.shared) + len(result.unique_a) == 3

    def test_overlap_identical_and_disjoint(self):
        labels = [0, 1, 1]
        a = self.records({0, 2}, labels)
        assert pie_overlap(a, a).shared == [0, 2]
        assert pie_overlap(a, self.records({1}, labels)).shared == []

    def test_overlap_universe_mismatch(self):
        with pytest.raises(CohortError):
            pie_overlap(self.records({0}, [0, 1]), self.records({0}, [0, 1, 1]))

    def test_accuracy_stats(self):
        labels = [0] * 10
        log = make_log([[0] * 8 + [1] * 2, [0] * 9 + [1]], labels)
        stats = accuracy_stats(log)
        assert stats.mean == pytest.approx(0.85)
        assert stats.std == pytest.approx(0.0707107, abs=1e-6)
        assert stats.models == 2

    def test_accuracy_single_model(self):
        stats = accuracy_stats(make_log([[0, 0]], [0, 0]))
        assert (stats.mean, stats.std, stats.single_model) == (1.0, 0.0, True)
