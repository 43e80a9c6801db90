import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcdsr.evaluate import (evaluate_all_ranking, ndcg_at_k, rank_all, real_plus_n, recall_at_k,
                            sample_real_plus_n_candidates, top_k)


def test_top_k_breaks_ties_by_id():
    scores = np.array([1.0, 3.0, 3.0, 2.0, 3.0])
    assert top_k(scores, 3).tolist() == [1, 2, 4]
    assert top_k(scores, 10).tolist() == [1, 2, 4, 3, 0]
    assert top_k(scores, 2, candidates=np.array([0, 3, 4])).tolist() == [4, 3]


def test_metrics_by_hand():
    assert recall_at_k([5, 1, 2], [1, 9]) == 0.5
    # hit at rank 2 only; ideal list has 2 hits in the top 3
    expect = (1 / np.log2(3)) / (1 + 1 / np.log2(3))
    assert ndcg_at_k([5, 1, 2], [1, 9]) == pytest.approx(expect)
    assert ndcg_at_k([1, 9], [1, 9]) == pytest.approx(1.0)
    assert recall_at_k([1], []) == 0.0 and ndcg_at_k([1], []) == 0.0


@given(st.permutations(range(6)), st.sets(st.integers(0, 5), min_size=1), st.integers(1, 6))
def test_metric_bounds(order, test, k):
    topk = list(order)[:k]
    r, n = recall_at_k(topk, sorted(test)), ndcg_at_k(topk, sorted(test))
    assert 0 <= r <= 1 and 0 <= n <= 1 + 1e-12


def test_rank_all_excludes_training_items():
    users = np.array([[1.0], [1.0]])
    items = np.array([[5.0], [4.0], [3.0], [2.0]])
    train = np.array([[0, 0], [1, 1], [1, 2]])
    out = rank_all(users, items, train, np.array([0, 1]), 2)
    assert out.tolist() == [[1, 2], [0, 3]]


def test_all_ranking_perfect_model():
    users = np.eye(3)
    items = np.eye(3)
    report = evaluate_all_ranking(users, items, np.zeros((0, 2), np.int64), np.array([[0, 0], [1, 1], [2, 2]]),
                                  ks=(1,))
    assert report.recall[1] == 1.0 and report.ndcg[1] == 1.0 and report.n_users == 3


def test_users_without_test_items_are_skipped():
    report = evaluate_all_ranking(np.ones((3, 1)), np.ones((4, 1)), np.array([[0, 0]]), np.array([[0, 1]]))
    assert report.n_users == 1


def test_real_plus_n_candidates_exclude_seen(rng):
    train = np.array([[0, 0], [0, 1], [1, 2]])
    test = np.array([[0, 3], [1, 4]])
    cands = sample_real_plus_n_candidates(train, test, 2, 50, n=10, seed=0)
    assert 3 in cands[0] and 0 not in cands[0] and 1 not in cands[0]
    assert len(cands[0]) == 11 and len(cands[1]) == 11
    again = sample_real_plus_n_candidates(train, test, 2, 50, n=10, seed=0)
    assert all(np.array_equal(cands[u], again[u]) for u in cands)


def test_real_plus_n_small_pool():
    cands = sample_real_plus_n_candidates(np.array([[0, 0]]), np.array([[0, 1]]), 1, 4, n=100)
    assert cands[0].tolist() == [1, 2, 3]


def test_report_formats(rng):
    u, i = rng.normal(size=(5, 2)), rng.normal(size=(8, 2))
    report = real_plus_n(u, i, np.array([[0, 0]]), np.array([[0, 1], [2, 3]]), n=4, ks=(3,), seed=1)
    assert "protocol=real_plus_n" in report.header() and "n=4" in report.header()
    assert report.to_tsv().splitlines()[1] == "k\trecall\tndcg"
    records = [json.loads(line) for line in report.to_json_lines().splitlines()]
    assert {(r["protocol"], r["k"], r["metric"]) for r in records} == {
        ("real_plus_n", 3, "recall"), ("real_plus_n", 3, "ndcg")}
    assert "recall@3=" in report.to_kv()
