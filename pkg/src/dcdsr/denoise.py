"""Structure-level denoising of the social network and the interaction graph.

Both passes score every edge of the *original* graph and keep the edges whose
score reaches the threshold, so an edge dropped in one epoch can come back in
the next.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import InteractionGraph, SocialNetwork, apply_mask

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class DenoiseThresholds:
    beta_s: float = 0.8
    beta_r: float = 0.4
    sigma: float = 20.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass
class DenoiseReport:
    social_edges_removed: int = 0
    interaction_edges_removed: int = 0
    removed_flagged_noise: int = 0
    flagged_noise_total: int = 0
    social_edges_total: int = 0
    interaction_edges_total: int = 0
    pc_histogram: np.ndarray = field(default_factory=lambda: np.zeros(HISTOGRAM_BINS, dtype=np.int64))
    ic_histogram: np.ndarray = field(default_factory=lambda: np.zeros(HISTOGRAM_BINS, dtype=np.int64))

    @property
    def removal_precision(self) -> float:
        """Fraction of removed interaction edges that carry the fabricated flag."""
        if self.interaction_edges_removed == 0:
            return float("nan")
        return self.removed_flagged_noise / self.interaction_edges_removed

    def to_text(self) -> str:
        rows = [
            ("social_edges_total", self.social_edges_total),
            ("social_edges_removed", self.social_edges_removed),
            ("interaction_edges_total", self.interaction_edges_total),
            ("interaction_edges_removed", self.interaction_edges_removed),
            ("flagged_noise_total", self.flagged_noise_total),
            ("removed_flagged_noise", self.removed_flagged_noise),
            ("removal_precision", f"{self.removal_precision:.6f}"),
        ]
        return "".join(f"{k}={v}\n" for k, v in rows)

    def histogram_csv(self) -> str:
        edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
        lines = ["bin_low,bin_high,pc_count,ic_count"]
        for k in range(HISTOGRAM_BINS):
            lines.append(f"{edges[k]:.1f},{edges[k + 1]:.1f},{self.pc_histogram[k]},{self.ic_histogram[k]}")
        return "\n".join(lines) + "\n"


def _histogram(scores: np.ndarray) -> np.ndarray:
    return np.histogram(scores, bins=HISTOGRAM_BINS, range=(0.0, 1.0))[0]


def consistency_score(a, b, sigma: float = 20.0):
    """Cosine-times-Gaussian agreement between two embeddings, in ``[0, 1]``.

    Works on single vectors or row-wise on ``(n, d)`` arrays. The cosine of a
    zero vector is taken as 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    norms = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    dots = np.sum(a * b, axis=-1)
    cos = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    cos = np.clip(cos, -1.0, 1.0)
    dist2 = np.sum((a - b) ** 2, axis=-1)
    return (1.0 + cos) / 2.0 * np.exp(-dist2 / (2.0 * sigma ** 2))


preference_consistency = consistency_score
interaction_compatibility = consistency_score


def denoise_social(original: SocialNetwork, user_pref: np.ndarray, thresholds: DenoiseThresholds):
    """Drop social edges whose preference consistency falls below ``beta_s``.

    Returns ``(denoised_network, keep_mask, report)``.
    """
    u, v = original.edges[:, 0], original.edges[:, 1]
    scores = consistency_score(user_pref[u], user_pref[v], thresholds.sigma)
    keep = ~(scores < thresholds.beta_s)
    report = DenoiseReport(
        social_edges_removed=int((~keep).sum()),
        social_edges_total=original.edge_count,
        pc_histogram=_histogram(scores),
    )
    return apply_mask(original, keep), keep, report


def social_enhance(user_pref: np.ndarray, social: SocialNetwork) -> np.ndarray:
    """Degree-normalized sum of first-order social neighbours' preferences."""
    return social.norm_adj @ user_pref


def denoise_interaction(original: InteractionGraph, enhanced_users: np.ndarray,
                        item_pref: np.ndarray, thresholds: DenoiseThresholds,
                        noise_flags: np.ndarray | None = None):
    """Drop interactions whose compatibility falls below ``beta_r``.

    ``noise_flags`` (aligned with ``original.edges``) only feeds the report.
    """
    users, items = original.edges[:, 0], original.edges[:, 1]
    scores = consistency_score(enhanced_users[users], item_pref[items], thresholds.sigma)
    keep = ~(scores < thresholds.beta_r)
    report = DenoiseReport(
        interaction_edges_removed=int((~keep).sum()),
        interaction_edges_total=original.edge_count,
        ic_histogram=_histogram(scores),
    )
    if noise_flags is not None:
        report.flagged_noise_total = int(noise_flags.sum())
        report.removed_flagged_noise = int((noise_flags & ~keep).sum())
    return apply_mask(original, keep), keep, report


def merge_reports(social: DenoiseReport, interaction: DenoiseReport) -> DenoiseReport:
    return DenoiseReport(
        social_edges_removed=social.social_edges_removed,
        social_edges_total=social.social_edges_total,
        pc_histogram=social.pc_histogram,
        interaction_edges_removed=interaction.interaction_edges_removed,
        interaction_edges_total=interaction.interaction_edges_total,
        removed_flagged_noise=interaction.removed_flagged_noise,
        flagged_noise_total=interaction.flagged_noise_total,
        ic_histogram=interaction.ic_histogram,
    )
