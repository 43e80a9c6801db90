"""Multi-run drivers: noise-robustness retention and ablation comparisons."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .data import DatasetSplit, inject_interaction_noise
from .evaluate import evaluate_all_ranking
from .trainer import Trainer


def fit_and_score(split: DatasetSplit, config: TrainConfig, ks=(20,)):
    """Train with ``config`` and score the returned checkpoint on the test split."""
    trainer = Trainer(split, config)
    result = trainer.train()
    users, items = trainer.recommendation_embeddings(result.interaction, result.state)
    return evaluate_all_ranking(users, items, split.train, split.test, ks=ks), result


@dataclass
class RetentionRow:
    ratio: float
    recall: float
    ndcg: float
    recall_retention: float
    ndcg_retention: float


def robustness_report(config: TrainConfig, split: DatasetSplit, noise_ratios, k: int = 20,
                      noise_seed: int = 0) -> list[RetentionRow]:
    """Metric at each injected-noise ratio divided by the metric without injection."""
    noise_ratios = list(noise_ratios)
    if not noise_ratios:
        return []
    clean, _ = fit_and_score(split, config, ks=(k,))
    rows = []
    for ratio in noise_ratios:
        if ratio == 0:
            report = clean
        else:
            report, _ = fit_and_score(inject_interaction_noise(split, ratio, noise_seed), config, ks=(k,))
        rows.append(RetentionRow(
            ratio,
            report.recall[k],
            report.ndcg[k],
            1.0 if ratio == 0 else _ratio(report.recall[k], clean.recall[k]),
            1.0 if ratio == 0 else _ratio(report.ndcg[k], clean.ndcg[k]),
        ))
    return rows


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else float("nan")


def format_retention(rows: list[RetentionRow], k: int = 20) -> str:
    lines = [f"ratio\trecall@{k}\tndcg@{k}\trecall_retention\tndcg_retention"]
    for r in rows:
        lines.append(f"{r.ratio}\t{r.recall:.6f}\t{r.ndcg:.6f}\t{r.recall_retention:.6f}\t{r.ndcg_retention:.6f}")
    return "\n".join(lines) + "\n"


def ablation_table(split: DatasetSplit, config: TrainConfig, ablations=("full", "rd", "sd", "ed"),
                   ks=(10, 20)) -> dict:
    """Test metrics per ablation variant, everything else held fixed."""
    out = {}
    for name in ablations:
        report, _ = fit_and_score(split, config.updated(ablation=name), ks=ks)
        out[name] = report
    return out


def median_over_seeds(values) -> float:
    return float(np.median(np.asarray(values, dtype=float)))
