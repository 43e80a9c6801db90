"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines are collected in the terminal summary) or directly
with ``python3 tests/test_acceptance.py``.
"""
import itertools
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402
from reference_lightgcn import lightgcn_bpr  # noqa: E402

from dcdsr.config import TrainConfig  # noqa: E402
from dcdsr.data import inject_interaction_noise  # noqa: E402
from dcdsr.denoise import DenoiseThresholds, consistency_score, denoise_interaction, denoise_social  # noqa: E402
from dcdsr.encoder import EmbeddingState  # noqa: E402
from dcdsr.evaluate import evaluate_all_ranking, real_plus_n, sample_real_plus_n_candidates  # noqa: E402
from dcdsr.graph import InteractionGraph, SocialNetwork  # noqa: E402
from dcdsr.losses import (BatchSample, LossWeights, ac_infonce_gradient_oracle, ac_infonce_loss,  # noqa: E402
                          infonce_gradient_oracle, infonce_loss, joint_loss)
from dcdsr.perturb import perturb_item, perturb_user_interaction, perturb_user_social, sample_view_noise  # noqa: E402
from dcdsr.synthetic import planted_communities  # noqa: E402
from dcdsr.trainer import Trainer, save_checkpoint  # noqa: E402

SEEDS = range(5)
# chosen for the full model on tuning seeds 100-102 (scripts/tune_synthetic.py); every variant reuses it
SYNTHETIC = dict(dim=50, batch_size=512, lr=0.005, max_epochs=100, patience=10,
                 beta_s=0.5, beta_r=0.4, tau=1.0)


def report(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _test_recall(split, config) -> float:
    trainer = Trainer(split, config)
    result = trainer.train()
    users, items = trainer.recommendation_embeddings(result.interaction, result.state)
    return evaluate_all_ranking(users, items, split.train, split.test, ks=(20,)).recall[20]


def test_end_to_end_gradient():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    m, n, d = 5, 8, 4
    inter = InteractionGraph([[0, 0], [0, 3], [1, 1], [1, 4], [2, 2], [2, 5], [3, 6], [3, 0], [4, 7], [4, 2]], m, n)
    social = SocialNetwork([[0, 1], [1, 2], [2, 3], [3, 4], [0, 4]], m)
    state = EmbeddingState(rng.normal(size=(m, d)), rng.normal(size=(n, d)))
    batch = BatchSample(np.array([0, 2, 4]), np.array([3, 5, 7]), np.array([1, 6, 0]))
    weights = LossWeights(0.1, 0.1, 0.1, 1e-4, 0.2)
    noise = sample_view_noise(rng.normal(size=(m, d)), rng.normal(size=(m, d)), rng.normal(size=(n, d)), rng)

    def total(u, i):
        return joint_loss(EmbeddingState(u, i), inter, social, batch, weights, 1, 0.1, noise).total

    out = joint_loss(state, inter, social, batch, weights, 1, 0.1, noise)
    h = 1e-5
    fd_u, fd_i = np.zeros_like(state.user), np.zeros_like(state.item)
    for table, fd in ((state.user, fd_u), (state.item, fd_i)):
        for idx in np.ndindex(table.shape):
            old = table[idx]
            table[idx] = old + h
            plus = total(state.user, state.item)
            table[idx] = old - h
            minus = total(state.user, state.item)
            table[idx] = old
            fd[idx] = (plus - minus) / (2 * h)
    err = _rel(np.concatenate([out.grad_user, out.grad_item]), np.concatenate([fd_u, fd_i]))
    elapsed = time.perf_counter() - started
    report("end-to-end gradient", err < 1e-4 and elapsed < 10,
           f"relative error {err:.2e} (< 1e-4), {elapsed:.2f}s (< 10s)")


def test_analytic_gradient_oracles():
    rng = np.random.default_rng(1)
    worst_nce = worst_ac = 0.0
    for _ in range(100):
        b, d = rng.integers(2, 9), rng.integers(2, 7)
        tau = rng.uniform(0.1, 1.0)
        h, v1, v2 = rng.normal(size=(3, b, d))
        _, g1, g2 = infonce_loss(v1, v2, tau)
        o1, o2 = infonce_gradient_oracle(v1, v2, tau)
        worst_nce = max(worst_nce, _rel(g1, o1), _rel(g2, o2))
        _, gh, a1, a2 = ac_infonce_loss(h, v1, v2, tau)
        oh, p1, p2 = ac_infonce_gradient_oracle(h, v1, v2, tau)
        worst_ac = max(worst_ac, _rel(gh, oh), _rel(a1, p1), _rel(a2, p2))
    report("analytic gradient oracles", max(worst_nce, worst_ac) < 1e-8,
           f"100 batches, worst relative error InfoNCE {worst_nce:.1e}, AC-InfoNCE {worst_ac:.1e} (< 1e-8)")


def _unit(x):
    return x / np.linalg.norm(x)


def test_anchor_stability():
    e = np.eye(4)
    # row 0: anchor on e0, views tilted asymmetrically; row 1's second view is a
    # hard negative sitting almost on top of row 0's second view
    anchor = np.array([e[0], e[1]])
    view1 = np.array([_unit(e[0] + 0.10 * e[2]), _unit(e[1] + 0.10 * e[2])])
    v2_0 = _unit(e[0] - 0.05 * e[2] + 0.02 * e[1])
    view2 = np.array([v2_0, _unit(v2_0 + 0.12 * e[3])])
    hard = float(view2[0] @ view2[1])
    tau, lr = 0.2, 0.1
    _, g_h, _, _ = ac_infonce_loss(anchor, view1, view2, tau)
    _, g1, g2 = infonce_loss(view1, view2, tau)
    anchor_move = lr * np.linalg.norm(g_h[0])
    midpoint_move = lr * np.linalg.norm((g1[0] + g2[0]) / 2)
    report("anchor stability", hard > 0.99 and 0 < anchor_move < midpoint_move,
           f"negative cosine {hard:.4f}; AC anchor step {anchor_move:.4f} < InfoNCE midpoint step {midpoint_move:.4f}")


def test_perturbation_invariants():
    rng = np.random.default_rng(2)
    eps = 0.1
    target, source = rng.normal(size=(2, 1000, 16))
    worst, octant = 0.0, True
    views = [*perturb_user_interaction(target, source, eps, rng), *perturb_user_social(target, source, eps, rng),
             *perturb_item(target, eps, rng)]
    for view in views:
        delta = target - view
        worst = max(worst, float(np.max(np.abs(np.linalg.norm(delta, axis=1) - eps))))
        octant &= bool(np.all(np.sign(delta) * np.sign(target) >= 0))
    report("perturbation invariants", worst < 1e-12 and octant,
           f"1000 rows x {len(views)} views, max |row displacement - eps| {worst:.1e}, hyperoctant kept: {octant}")


def test_denoising_invariants():
    rng = np.random.default_rng(3)
    a = rng.normal(scale=rng.uniform(0.01, 100, size=(5000, 1)), size=(5000, 8))
    b = rng.normal(scale=rng.uniform(0.01, 100, size=(5000, 1)), size=(5000, 8))
    scores = consistency_score(a, b)
    in_range = bool(np.all((scores >= 0) & (scores <= 1)))

    planted = planted_communities(seed=0)
    split = planted.split
    inter = InteractionGraph(split.train, split.n_users, split.n_items)
    social = SocialNetwork(split.social, split.n_users)
    users, items = rng.normal(size=(split.n_users, 8)), rng.normal(size=(split.n_items, 8))
    keep_zero = (denoise_social(social, users, DenoiseThresholds(0, 0))[1].all()
                 and denoise_interaction(inter, users, items, DenoiseThresholds(0, 0))[1].all())
    monotone, prev = True, None
    for beta in np.linspace(0, 1, 21):
        thr = DenoiseThresholds(beta, beta)
        kept = np.concatenate([denoise_social(social, users, thr)[1],
                               denoise_interaction(inter, users, items, thr)[1]])
        monotone &= prev is None or bool(np.all(kept <= prev))
        prev = kept

    trainer = Trainer(split, TrainConfig(**SYNTHETIC).updated(max_epochs=5, validate=False))
    original_r = set(map(tuple, trainer.interaction.edges.tolist()))
    original_s = set(map(tuple, trainer.social.edges.tolist()))
    subsets = []
    trainer.train(on_epoch=lambda tr, _: subsets.append(
        set(map(tuple, tr.denoised_interaction.edges.tolist())) <= original_r
        and set(map(tuple, tr.denoised_social.edges.tolist())) <= original_s))
    ok = in_range and keep_zero and monotone and all(subsets)
    report("denoising invariants", ok,
           f"scores in [0,1]: {in_range}; beta=0 keeps all: {keep_zero}; monotone over 21 thresholds: "
           f"{monotone}; subsets in {sum(subsets)}/{len(subsets)} epochs")


@pytest.mark.slow
def test_planted_noise_recovery():
    precisions = []
    for seed in SEEDS:
        split = planted_communities(seed=seed).split
        trainer = Trainer(split, TrainConfig(**SYNTHETIC).updated(max_epochs=30, validate=False, seed=seed))
        trainer.train()
        precisions.append(trainer.reconstruct().removal_precision)
    base = float(np.mean(planted_communities(seed=0).split.noise_flags))
    wins = sum(p > base for p in precisions)
    report("planted-noise recovery", wins >= 4,
           f"removal precision after 30 epochs {[round(p, 3) for p in precisions]} vs base rate {base:.3f}; "
           f"{wins}/5 seeds above")


@pytest.mark.slow
def test_ablation_direction():
    recall = {name: [] for name in ("full", "ed", "sd")}
    for seed in SEEDS:
        split = planted_communities(seed=seed).split
        for name in recall:
            recall[name].append(_test_recall(split, TrainConfig(**SYNTHETIC).updated(ablation=name, seed=seed)))
    med = {k: float(np.median(v)) for k, v in recall.items()}
    report("ablation direction", med["full"] >= med["ed"] and med["full"] >= med["sd"],
           f"median Recall@20 full {med['full']:.4f}, ed {med['ed']:.4f}, sd {med['sd']:.4f}")


@pytest.mark.slow
def test_robustness_direction():
    ratios = (0.1, 0.2, 0.3)
    retention = {name: {r: [] for r in ratios} for name in ("full", "sd")}
    for seed in SEEDS:
        clean = planted_communities(seed=seed, interaction_noise=0.0).split
        for name in retention:
            cfg = TrainConfig(**SYNTHETIC).updated(ablation=name, seed=seed)
            base = _test_recall(clean, cfg)
            for r in ratios:
                retention[name][r].append(_test_recall(inject_interaction_noise(clean, r, seed), cfg) / base)
    med = {name: {r: float(np.median(v)) for r, v in table.items()} for name, table in retention.items()}
    ok = all(med["full"][r] >= med["sd"][r] for r in ratios)
    detail = ", ".join(f"{r}: full {med['full'][r]:.3f} vs sd {med['sd'][r]:.3f}" for r in ratios)
    report("robustness direction", ok, f"median Recall@20 retention {detail}")


def _brute_metrics(ranking, test, k):
    top = ranking[:k]
    recall = len(set(top) & set(test)) / len(test)
    dcg = sum(1 / np.log2(pos + 2) for pos, item in enumerate(top) if item in test)
    idcg = max(sum(1 / np.log2(pos + 2) for pos, item in enumerate(perm[:k]) if item in test)
               for perm in itertools.permutations(ranking))
    return recall, dcg / idcg


def test_metric_oracles():
    worst = 0.0
    cases = 0
    for n_items in range(1, 6):
        for ranking in itertools.permutations(range(n_items)):
            scores = np.empty(n_items)
            scores[list(ranking)] = np.arange(n_items, 0, -1)
            for size in range(1, n_items + 1):
                for test in itertools.combinations(range(n_items), size):
                    test_edges = np.array([[0, i] for i in test])
                    for k in range(1, n_items + 1):
                        got = evaluate_all_ranking(np.ones((1, 1)), scores[:, None], np.zeros((0, 2), np.int64),
                                                   test_edges, ks=(k,))
                        want = _brute_metrics(list(ranking), set(test), k)
                        worst = max(worst, abs(got.recall[k] - want[0]), abs(got.ndcg[k] - want[1]))
                        cases += 1

    rng = np.random.default_rng(4)
    m, n_items = 10, 200
    users, items = rng.normal(size=(m, 6)), rng.normal(size=(n_items, 6))
    pairs = np.array([(u, i) for u in range(m) for i in rng.choice(n_items, 15, replace=False)])
    train, test = pairs[::3], np.delete(pairs, np.s_[::3], axis=0)
    got = real_plus_n(users, items, train, test, n=100, ks=(3, 10), seed=5)
    cands = sample_real_plus_n_candidates(train, test, m, n_items, n=100, seed=5)
    valid = True
    brute = {3: [], 10: []}
    for u, cand in cands.items():
        mine = set(test[test[:, 0] == u, 1].tolist())
        seen = set(train[train[:, 0] == u, 1].tolist())
        valid &= len(set(cand.tolist()) - mine) == 100 and not set(cand.tolist()) & seen
        ranked = sorted(cand.tolist(), key=lambda i: (-float(users[u] @ items[i]), i))
        for k in brute:
            top = ranked[:k]
            hits = [i in mine for i in top]
            dcg = sum(h / np.log2(p + 2) for p, h in enumerate(hits))
            idcg = sum(1 / np.log2(p + 2) for p in range(min(len(mine), k)))
            brute[k].append((sum(hits) / len(mine), dcg / idcg))
    rpn = max(abs(got.recall[k] - np.mean([r for r, _ in brute[k]])) for k in brute)
    rpn = max(rpn, max(abs(got.ndcg[k] - np.mean([g for _, g in brute[k]])) for k in brute))
    report("metric oracles", worst < 1e-12 and rpn < 1e-12 and valid,
           f"{cases} exhaustive cases max error {worst:.1e}; real-plus-N (n=100, 200 items) max error {rpn:.1e}, "
           f"candidate sets valid: {valid}")


def test_baseline_equivalence():
    split = planted_communities(seed=0, n_users=60, n_items=80, mean_interactions=10).split
    cfg = TrainConfig(dim=16, batch_size=128, lr=0.01, max_epochs=5, validate=False, ablation="sd+ed",
                      lambda1=0.0, lambda2=0.0, lambda3=0.0, seed=3)
    result = Trainer(split, cfg).train()
    ref, ref_user, ref_item = lightgcn_bpr(split.train, split.n_users, split.n_items, cfg.dim, cfg.layers,
                                           cfg.lr, cfg.batch_size, cfg.lambda_reg, cfg.max_epochs, cfg.seed)
    worst = max(max(abs(r[0] - h.bpr_loss) / abs(r[0]), abs(r[1] - h.total_loss) / abs(r[1]))
                for r, h in zip(ref, result.history))
    report("baseline equivalence", len(ref) == len(result.history) and worst < 1e-10,
           f"{len(ref)} epochs, worst relative loss gap vs autograd LightGCN-BPR {worst:.1e} (< 1e-10)")


def test_determinism():
    split = planted_communities(seed=1).split
    cfg = TrainConfig(**SYNTHETIC).updated(max_epochs=4, seed=11)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for run in range(2):
            directory = Path(tmp) / f"run{run}"
            save_checkpoint(Trainer(split, cfg).train(), directory, cfg, timing=False)
            blobs.append({p.name: p.read_bytes() for p in sorted(directory.iterdir())})
    same = blobs[0] == blobs[1]
    report("determinism", same, f"{len(blobs[0])} artifacts (log, embeddings, graphs, meta) bitwise identical: {same}")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
