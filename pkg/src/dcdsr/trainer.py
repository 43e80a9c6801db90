"""Joint training loop: per-epoch structure denoising, then mini-batch optimization."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .data import DatasetSplit
from .denoise import DenoiseReport, denoise_interaction, denoise_social, merge_reports, social_enhance
from .encoder import EmbeddingState, propagate_interaction, save_embeddings
from .errors import DenoiseCollapseError, NumericalError
from .evaluate import evaluate_all_ranking
from .graph import InteractionGraph, SocialNetwork, write_edges
from .losses import BatchSample, joint_loss
from .perturb import sample_view_noise

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "bpr_loss", "cl_r", "cl_s", "cl_i", "social_removed",
               "interaction_removed", "val_recall@20", "wall_seconds")


def xavier_uniform(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    # each row is treated as a dim -> dim layer: fan_in = fan_out = dim
    bound = np.sqrt(6.0 / (dim + dim))
    return rng.uniform(-bound, bound, size=(rows, dim))


class Adam:
    """Bias-corrected Adam over a fixed list of arrays, updated in place."""

    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def initialize(config: TrainConfig, n_users: int, n_items: int, rng: np.random.Generator):
    state = EmbeddingState(xavier_uniform(rng, n_users, config.dim), xavier_uniform(rng, n_items, config.dim))
    opt = Adam([state.user.shape, state.item.shape], config.lr,
               config.adam_beta1, config.adam_beta2, config.adam_eps)
    return state, opt


def sample_negatives(rng: np.random.Generator, graph: InteractionGraph, users: np.ndarray,
                     max_tries: int = 100) -> np.ndarray:
    """One uniform non-interacted item per user, by rejection."""
    codes = graph.edges[:, 0] * graph.n_items + graph.edges[:, 1]
    neg = rng.integers(0, graph.n_items, size=len(users))
    bad = np.isin(users * graph.n_items + neg, codes)
    for _ in range(max_tries):
        if not bad.any():
            break
        neg[bad] = rng.integers(0, graph.n_items, size=int(bad.sum()))
        bad = np.isin(users * graph.n_items + neg, codes)
    return neg


def holdout_validation(edges: np.ndarray, fraction: float, seed: int):
    """Per-user random holdout; returns ``(keep_mask, val_edges)``."""
    keep = np.ones(len(edges), dtype=bool)
    if fraction <= 0 or len(edges) == 0:
        return keep, edges[:0]
    rng = np.random.default_rng([seed, 1])
    keys = rng.random(len(edges))
    order = np.lexsort((keys, edges[:, 0]))
    users = edges[order, 0]
    counts = np.bincount(users)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rank = np.arange(len(users)) - starts[users]
    n_val = np.minimum(np.floor(fraction * counts + 0.5).astype(np.int64), counts - 1)
    held = rank < n_val[users]
    keep[order[held]] = False
    return keep, edges[~keep]


@dataclass
class EpochRecord:
    epoch: int
    bpr_loss: float
    cl_r: float
    cl_s: float
    cl_i: float
    total_loss: float
    report: DenoiseReport
    val_recall: float = float("nan")
    wall_seconds: float = 0.0

    def log_line(self, timing: bool = True) -> str:
        wall = f"{self.wall_seconds:.3f}" if timing else "0"
        return "\t".join([
            str(self.epoch), *(repr(float(x)) for x in (self.bpr_loss, self.cl_r, self.cl_s, self.cl_i)),
            str(self.report.social_edges_removed), str(self.report.interaction_edges_removed),
            repr(float(self.val_recall)), wall,
        ])


@dataclass
class TrainResult:
    state: EmbeddingState
    interaction: InteractionGraph
    social: SocialNetwork
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_metric: float = float("nan")

    def log_text(self, timing: bool = True) -> str:
        return "\t".join(LOG_COLUMNS) + "\n" + "".join(r.log_line(timing) + "\n" for r in self.history)


class Trainer:
    def __init__(self, split: DatasetSplit, config: TrainConfig):
        self.config = config.check()
        self.split = split
        train = split.train
        flags = split.noise_flags
        self.val_edges = train[:0]
        if config.validate and config.val_fraction > 0:
            keep, self.val_edges = holdout_validation(train, config.val_fraction, config.seed)
            train = train[keep]
            flags = None if flags is None else flags[keep]
        self.noise_flags = flags
        self.interaction = InteractionGraph(train, split.n_users, split.n_items)
        self.social = SocialNetwork(split.social, split.n_users)
        self.rng = np.random.default_rng(config.seed)
        self.state, self.optimizer = initialize(config, split.n_users, split.n_items, self.rng)
        self.denoised_interaction = self.interaction
        self.denoised_social = self.social
        self.epoch = 0
        self.history: list[EpochRecord] = []
        self.best_metric = -np.inf
        self.best_epoch = -1
        self.best_state = self.state.copy()
        self.best_graphs = (self.interaction, self.social)
        self.bad_epochs = 0

    def reconstruct(self) -> DenoiseReport:
        """Rebuild both denoised graphs from the originals."""
        cfg = self.config
        thresholds = cfg.thresholds
        pref = propagate_interaction(self.state, self.denoised_interaction, cfg.layers)
        social_report = DenoiseReport(social_edges_total=self.social.edge_count)
        inter_report = DenoiseReport(interaction_edges_total=self.interaction.edge_count)
        social, interaction = self.social, self.interaction
        if cfg.denoise_social:
            social, _, social_report = denoise_social(self.social, pref.users, thresholds)
            if cfg.denoise_interactions:
                enhanced = social_enhance(pref.users, social)
                interaction, _, inter_report = denoise_interaction(
                    self.interaction, enhanced, pref.items, thresholds, self.noise_flags)
        if interaction.edge_count == 0:
            raise DenoiseCollapseError(
                f"epoch {self.epoch}: every interaction edge was removed "
                f"(beta_r={cfg.beta_r}, sigma={cfg.sigma}); lower the threshold")
        if self.noise_flags is not None:
            inter_report.flagged_noise_total = int(self.noise_flags.sum())
        self.denoised_social, self.denoised_interaction = social, interaction
        return merge_reports(social_report, inter_report)

    def _cl_scale(self):
        cfg = self.config
        if "rd" in cfg.ablation_parts:
            return (0.0, cfg.lambda2, 0.0)
        return (cfg.lambda1, cfg.lambda2, cfg.lambda3)

    def run_epoch(self) -> EpochRecord:
        cfg = self.config
        started = time.perf_counter()
        report = self.reconstruct()
        graph, social = self.denoised_interaction, self.denoised_social
        weights = cfg.weights
        use_cl = cfg.use_contrastive
        scale = self._cl_scale()

        def noise(rec_users, soc_users, items):
            return sample_view_noise(rec_users, soc_users, items, self.rng, cfg.perturb_mode)

        sums = np.zeros(5)
        order = self.rng.permutation(graph.edge_count)
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            users = graph.edges[idx, 0]
            batch = BatchSample(users, graph.edges[idx, 1], sample_negatives(self.rng, graph, users))
            out = joint_loss(self.state, graph, social, batch, weights, cfg.layers, cfg.epsilon,
                             noise if use_cl else None, cfg.cl_loss, scale)
            if not np.isfinite(out.total):
                raise NumericalError(f"epoch {self.epoch}: non-finite loss {out.total}")
            self.optimizer.step([self.state.user, self.state.item], [out.grad_user, out.grad_item])
            sums += (out.bpr, out.cl_interaction, out.cl_social, out.cl_item, out.total)

        record = EpochRecord(self.epoch, *map(float, sums), report=report)
        if cfg.validate and len(self.val_edges):
            record.val_recall = self.validation_recall()
        record.wall_seconds = time.perf_counter() - started
        self.history.append(record)
        self.epoch += 1
        return record

    def recommendation_embeddings(self, interaction: InteractionGraph | None = None,
                                  state: EmbeddingState | None = None):
        prop = propagate_interaction(state or self.state, interaction or self.denoised_interaction,
                                     self.config.layers)
        return prop.users, prop.items

    def validation_recall(self, k: int = 20) -> float:
        users, items = self.recommendation_embeddings()
        return evaluate_all_ranking(users, items, self.interaction.edges, self.val_edges, ks=(k,)).recall[k]

    def _track_best(self, record: EpochRecord) -> bool:
        """Update the best checkpoint; return True when training should stop."""
        if not self.config.validate or not len(self.val_edges):
            self.best_epoch, self.best_metric = record.epoch, float("nan")
            self.best_state = self.state.copy()
            self.best_graphs = (self.denoised_interaction, self.denoised_social)
            return False
        if record.val_recall > self.best_metric:
            self.best_metric, self.best_epoch = record.val_recall, record.epoch
            self.best_state = self.state.copy()
            self.best_graphs = (self.denoised_interaction, self.denoised_social)
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.config.patience

    def train(self, epochs: int | None = None, on_epoch=None) -> TrainResult:
        """Run until early stopping or ``max_epochs`` (or ``epochs`` more epochs)."""
        stop_at = self.config.max_epochs if epochs is None else self.epoch + epochs
        while self.epoch < stop_at:
            record = self.run_epoch()
            log.info("epoch %d bpr=%.4f removed s/r=%d/%d val=%.4f", record.epoch, record.bpr_loss,
                     record.report.social_edges_removed, record.report.interaction_edges_removed,
                     record.val_recall)
            stop = self._track_best(record)
            if on_epoch is not None:
                on_epoch(self, record)
            if stop:
                break
        return self.result()

    def result(self) -> TrainResult:
        return TrainResult(self.best_state, self.best_graphs[0], self.best_graphs[1],
                           list(self.history), self.best_epoch, float(self.best_metric))

    # resumable snapshots

    def save_snapshot(self, path) -> None:
        arrays = {
            "user": self.state.user, "item": self.state.item,
            "best_user": self.best_state.user, "best_item": self.best_state.item,
            "denoised": self.denoised_interaction.edges,
            "best_interaction": self.best_graphs[0].edges, "best_social": self.best_graphs[1].edges,
        }
        for k, (m, v) in enumerate(zip(self.optimizer.m, self.optimizer.v)):
            arrays[f"m{k}"], arrays[f"v{k}"] = m, v
        scalars = {
            "t": self.optimizer.t, "epoch": self.epoch, "best_metric": self.best_metric,
            "best_epoch": self.best_epoch, "bad_epochs": self.bad_epochs,
            "rng": self.rng.bit_generator.state, "config_hash": self.config.config_hash(),
            "history": [[r.epoch, r.bpr_loss, r.cl_r, r.cl_s, r.cl_i, r.total_loss,
                         r.report.social_edges_removed, r.report.interaction_edges_removed,
                         r.report.removed_flagged_noise, r.val_recall, r.wall_seconds]
                        for r in self.history],
        }
        with open(path, "wb") as fh:
            np.savez(fh, scalars=np.array(json.dumps(scalars)), **arrays)

    @classmethod
    def from_snapshot(cls, path, split: DatasetSplit, config: TrainConfig) -> "Trainer":
        trainer = cls(split, config)
        with np.load(path) as snap:
            scalars = json.loads(str(snap["scalars"]))
            if scalars["config_hash"] != config.config_hash():
                raise ValueError("snapshot was written under a different config")
            trainer.state = EmbeddingState(snap["user"].copy(), snap["item"].copy())
            trainer.best_state = EmbeddingState(snap["best_user"].copy(), snap["best_item"].copy())
            trainer.denoised_interaction = InteractionGraph(snap["denoised"], split.n_users, split.n_items)
            trainer.best_graphs = (InteractionGraph(snap["best_interaction"], split.n_users, split.n_items),
                                   SocialNetwork(snap["best_social"], split.n_users))
            trainer.optimizer.m = [snap["m0"].copy(), snap["m1"].copy()]
            trainer.optimizer.v = [snap["v0"].copy(), snap["v1"].copy()]
        trainer.optimizer.t = scalars["t"]
        trainer.epoch = scalars["epoch"]
        trainer.best_metric = scalars["best_metric"]
        trainer.best_epoch = scalars["best_epoch"]
        trainer.bad_epochs = scalars["bad_epochs"]
        trainer.rng.bit_generator.state = scalars["rng"]
        for row in scalars["history"]:
            report = DenoiseReport(social_edges_removed=row[6], interaction_edges_removed=row[7],
                                   removed_flagged_noise=row[8])
            trainer.history.append(EpochRecord(row[0], row[1], row[2], row[3], row[4], row[5],
                                               report, row[9], row[10]))
        return trainer


def train(config: TrainConfig, split: DatasetSplit) -> TrainResult:
    return Trainer(split, config).train()


def save_checkpoint(result: TrainResult, directory, config: TrainConfig, timing: bool = True) -> Path:
    """Write embeddings, the graphs they were trained on, metadata and the training log."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_embeddings(directory / "embeddings.bin", result.state)
    write_edges(result.interaction, directory / "denoised_interactions.txt")
    write_edges(result.social, directory / "denoised_social.txt")
    with open(directory / "embeddings.meta", "w") as fh:
        fh.write(f"config_hash = {config.config_hash()}\n")
        fh.write(f"epoch = {result.best_epoch}\n")
        fh.write(f"val_recall@20 = {result.best_metric!r}\n")
        fh.write(f"layers = {config.layers}\n")
    (directory / "train.log").write_text(result.log_text(timing))
    return directory
