"""Top-K ranking metrics under the all-ranking and real-plus-N protocols."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ALL_RANKING = "all_ranking"
REAL_PLUS_N = "real_plus_n"


def top_k(scores: np.ndarray, k: int, candidates: np.ndarray | None = None) -> np.ndarray:
    """Indices of the ``k`` best scores; ties go to the lower index.

    With ``candidates`` (ascending item ids), only those entries compete and
    item ids are returned.
    """
    if candidates is not None:
        order = np.lexsort((candidates, -scores[candidates]))
        return candidates[order[:k]]
    k = min(k, len(scores))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    part = np.argpartition(-scores, k - 1)[:k]
    cutoff = scores[part].min()
    pool = np.flatnonzero(scores >= cutoff)
    return pool[np.lexsort((pool, -scores[pool]))][:k]


def recall_at_k(topk, test_items) -> float:
    test_items = np.asarray(test_items)
    if len(test_items) == 0:
        return 0.0
    return len(np.intersect1d(topk, test_items)) / len(test_items)


def ndcg_at_k(topk, test_items) -> float:
    """Binary-relevance NDCG; the ideal list places min(|test|, K) hits first."""
    test_items = np.asarray(test_items)
    topk = np.asarray(topk)
    if len(test_items) == 0 or len(topk) == 0:
        return 0.0
    discounts = 1.0 / np.log2(np.arange(2, len(topk) + 2))
    hits = np.isin(topk, test_items)
    idcg = discounts[: min(len(test_items), len(topk))].sum()
    return float(discounts[hits].sum() / idcg)


def _group(edges: np.ndarray, n_users: int) -> list[np.ndarray]:
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    items = edges[order, 1]
    bounds = np.searchsorted(edges[order, 0], np.arange(n_users + 1))
    return [items[bounds[u]:bounds[u + 1]] for u in range(n_users)]


def rank_all(user_emb, item_emb, train_edges, users, k: int, chunk: int = 1024) -> np.ndarray:
    """Top-``k`` items for each listed user, training items excluded."""
    users = np.asarray(users, dtype=np.int64)
    n_users = user_emb.shape[0]
    seen = _group(np.asarray(train_edges).reshape(-1, 2), n_users)
    out = np.zeros((len(users), min(k, item_emb.shape[0])), dtype=np.int64)
    for start in range(0, len(users), chunk):
        block = users[start:start + chunk]
        scores = user_emb[block] @ item_emb.T
        for r, u in enumerate(block):
            scores[r, seen[u]] = -np.inf
            out[start + r] = top_k(scores[r], k)
    return out


@dataclass
class MetricsReport:
    protocol: str
    ks: tuple[int, ...]
    recall: dict = field(default_factory=dict)
    ndcg: dict = field(default_factory=dict)
    n_users: int = 0
    n: int | None = None
    seed: int | None = None

    def header(self) -> str:
        parts = [f"protocol={self.protocol}", f"users={self.n_users}"]
        if self.protocol == REAL_PLUS_N:
            parts += [f"n={self.n}", f"seed={self.seed}"]
        parts.append("k=" + ",".join(map(str, self.ks)))
        return " ".join(parts)

    def to_tsv(self) -> str:
        lines = ["# " + self.header(), "k\trecall\tndcg"]
        lines += [f"{k}\t{self.recall[k]:.6f}\t{self.ndcg[k]:.6f}" for k in self.ks]
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        lines = [f"protocol={self.protocol}", f"users={self.n_users}"]
        if self.protocol == REAL_PLUS_N:
            lines += [f"n={self.n}", f"seed={self.seed}"]
        for k in self.ks:
            lines += [f"recall@{k}={self.recall[k]:.6f}", f"ndcg@{k}={self.ndcg[k]:.6f}"]
        return "\n".join(lines) + "\n"

    def to_json_lines(self) -> str:
        records = []
        for k in self.ks:
            for metric, table in (("recall", self.recall), ("ndcg", self.ndcg)):
                records.append(json.dumps({"protocol": self.protocol, "k": k, "metric": metric,
                                           "value": table[k], "users": self.n_users}))
        return "\n".join(records) + "\n"


def evaluate_all_ranking(user_emb, item_emb, train_edges, test_edges, ks=(10, 20)) -> MetricsReport:
    ks = tuple(sorted(ks))
    n_users = user_emb.shape[0]
    tests = _group(np.asarray(test_edges).reshape(-1, 2), n_users)
    users = np.array([u for u in range(n_users) if len(tests[u])], dtype=np.int64)
    report = MetricsReport(ALL_RANKING, ks, n_users=len(users))
    if len(users) == 0:
        report.recall = {k: 0.0 for k in ks}
        report.ndcg = {k: 0.0 for k in ks}
        return report
    ranked = rank_all(user_emb, item_emb, train_edges, users, max(ks))
    for k in ks:
        report.recall[k] = float(np.mean([recall_at_k(ranked[r, :k], tests[u]) for r, u in enumerate(users)]))
        report.ndcg[k] = float(np.mean([ndcg_at_k(ranked[r, :k], tests[u]) for r, u in enumerate(users)]))
    return report


def sample_real_plus_n_candidates(train_edges, test_edges, n_users: int, n_items: int,
                                  n: int = 100, seed: int = 0) -> dict[int, np.ndarray]:
    """Per test user: test positives plus ``n`` sampled items the user never touched."""
    rng = np.random.default_rng(seed)
    seen = _group(np.asarray(train_edges).reshape(-1, 2), n_users)
    tests = _group(np.asarray(test_edges).reshape(-1, 2), n_users)
    out = {}
    for u in range(n_users):
        if len(tests[u]) == 0:
            continue
        pool = np.setdiff1d(np.arange(n_items), np.concatenate([seen[u], tests[u]]))
        negatives = rng.choice(pool, size=min(n, len(pool)), replace=False)
        out[u] = np.union1d(tests[u], negatives)
    return out


def real_plus_n(user_emb, item_emb, train_edges, test_edges, n: int = 100, ks=(3,), seed: int = 0) -> MetricsReport:
    ks = tuple(sorted(ks))
    n_users, n_items = user_emb.shape[0], item_emb.shape[0]
    tests = _group(np.asarray(test_edges).reshape(-1, 2), n_users)
    candidates = sample_real_plus_n_candidates(train_edges, test_edges, n_users, n_items, n, seed)
    report = MetricsReport(REAL_PLUS_N, ks, n_users=len(candidates), n=n, seed=seed)
    recalls = {k: [] for k in ks}
    ndcgs = {k: [] for k in ks}
    for u, cand in candidates.items():
        scores = np.full(n_items, -np.inf)
        scores[cand] = item_emb[cand] @ user_emb[u]
        ranked = top_k(scores, max(ks), candidates=cand)
        for k in ks:
            recalls[k].append(recall_at_k(ranked[:k], tests[u]))
            ndcgs[k].append(ndcg_at_k(ranked[:k], tests[u]))
    report.recall = {k: float(np.mean(recalls[k])) if recalls[k] else 0.0 for k in ks}
    report.ndcg = {k: float(np.mean(ndcgs[k])) if ndcgs[k] else 0.0 for k in ks}
    return report
