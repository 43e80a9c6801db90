"""Ranking and contrastive losses with hand-derived gradients.

All losses are sums over the batch. Every function returns the loss value
followed by gradients with respect to each of its array arguments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .encoder import EmbeddingState, propagate_interaction, propagate_social
from .errors import ConfigError
from .graph import InteractionGraph, SocialNetwork
from .perturb import ViewNoise

AC_INFONCE = "ac_infonce"
INFONCE = "infonce"


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.1
    lambda2: float = 0.1
    lambda3: float = 0.1
    lambda_reg: float = 1e-4
    tau: float = 0.2

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if min(self.lambda1, self.lambda2, self.lambda3, self.lambda_reg) < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass(frozen=True)
class BatchSample:
    users: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray

    @property
    def batch_users(self) -> np.ndarray:
        return np.unique(self.users)

    @property
    def batch_items(self) -> np.ndarray:
        return np.unique(self.positives)

    def __len__(self):
        return len(self.users)


def score(p_u, p_i) -> float:
    return float(np.dot(p_u, p_i))


def bpr_loss(users, positives, negatives, user_table, item_table):
    """Summed ``-log sigmoid(y_ui - y_uj)`` over the triples."""
    pu = user_table[users]
    diff = item_table[positives] - item_table[negatives]
    margin = np.sum(pu * diff, axis=1)
    loss = float(np.sum(np.logaddexp(0.0, -margin)))
    coef = -expit(-margin)[:, None]
    g_user = np.zeros_like(user_table)
    g_item = np.zeros_like(item_table)
    np.add.at(g_user, users, coef * diff)
    np.add.at(g_item, positives, coef * pu)
    np.add.at(g_item, negatives, -coef * pu)
    return loss, g_user, g_item


def _unit_rows(x):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0), norms


def _unit_rows_backward(g_unit, unit, norms):
    radial = np.sum(g_unit * unit, axis=1, keepdims=True)
    return np.divide(g_unit - radial * unit, norms, out=np.zeros_like(g_unit), where=norms > 0)


def _check_tau(tau):
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")


def infonce_loss(view1, view2, tau: float):
    """InfoNCE between row-aligned views, cosine similarity, in-batch negatives.

    Returns ``(loss, grad_view1, grad_view2)``.
    """
    _check_tau(tau)
    a, na = _unit_rows(view1)
    b, nb = _unit_rows(view2)
    logits = a @ b.T / tau
    loss = float(np.sum(logsumexp(logits, axis=1) - np.diag(logits)))
    g_logits = (softmax(logits, axis=1) - np.eye(len(a))) / tau
    return loss, _unit_rows_backward(g_logits @ b, a, na), _unit_rows_backward(g_logits.T @ a, b, nb)


def ac_infonce_loss(anchor, view1, view2, tau: float):
    """Anchor-centred InfoNCE: the unperturbed row is pulled toward both views.

    Returns ``(loss, grad_anchor, grad_view1, grad_view2)``.
    """
    _check_tau(tau)
    h, nh = _unit_rows(anchor)
    a, na = _unit_rows(view1)
    b, nb = _unit_rows(view2)
    logits = a @ b.T / tau
    pull = (np.sum(h * a, axis=1) + np.sum(h * b, axis=1)) / (2.0 * tau)
    loss = float(np.sum(logsumexp(logits, axis=1) - pull))
    p = softmax(logits, axis=1) / tau
    g_h = -(a + b) / (2.0 * tau)
    g_a = p @ b - h / (2.0 * tau)
    g_b = p.T @ a - h / (2.0 * tau)
    return (loss, _unit_rows_backward(g_h, h, nh), _unit_rows_backward(g_a, a, na),
            _unit_rows_backward(g_b, b, nb))


def contrastive_loss(kind: str, anchor, view1, view2, tau: float):
    """Dispatch to AC-InfoNCE or plain InfoNCE with a uniform return shape."""
    if kind == AC_INFONCE:
        return ac_infonce_loss(anchor, view1, view2, tau)
    if kind == INFONCE:
        loss, g1, g2 = infonce_loss(view1, view2, tau)
        return loss, np.zeros_like(anchor), g1, g2
    raise ConfigError(f"unknown contrastive loss {kind!r}")


# Per-anchor reference gradients. These follow the softmax-expectation form
# "(E_{j~p(j|i)}[ds_ij] - ds_ii) / tau" term by term, with the exact cosine
# derivative ds(x, y)/dx = (y/|y| - s x/|x|) / |x|.

def cosine(x, y) -> float:
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return 0.0
    return float(x @ y / (nx * ny))


def cosine_grad(x, y):
    """Gradient of ``cosine(x, y)`` with respect to ``x``."""
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        return np.zeros_like(x)
    return (y / ny - cosine(x, y) * x / nx) / nx


def _conditional(view1, view2, i, tau):
    sims = np.array([cosine(view1[i], view2[j]) for j in range(len(view2))]) / tau
    w = np.exp(sims - sims.max())
    return w / w.sum()


def infonce_gradient_oracle(view1, view2, tau: float):
    n = len(view1)
    g1 = np.zeros_like(view1)
    g2 = np.zeros_like(view2)
    for i in range(n):
        p = _conditional(view1, view2, i, tau)
        expect = sum(p[j] * cosine_grad(view1[i], view2[j]) for j in range(n))
        g1[i] += (expect - cosine_grad(view1[i], view2[i])) / tau
        g2[i] += (p[i] - 1.0) * cosine_grad(view2[i], view1[i]) / tau
        for j in range(n):
            if j != i:
                g2[j] += p[j] * cosine_grad(view2[j], view1[i]) / tau
    return g1, g2


def ac_infonce_gradient_oracle(anchor, view1, view2, tau: float):
    n = len(anchor)
    gh = np.zeros_like(anchor)
    g1 = np.zeros_like(view1)
    g2 = np.zeros_like(view2)
    for i in range(n):
        p = _conditional(view1, view2, i, tau)
        gh[i] = -(cosine_grad(anchor[i], view1[i]) + cosine_grad(anchor[i], view2[i])) / (2 * tau)
        expect = sum(p[j] * cosine_grad(view1[i], view2[j]) for j in range(n))
        g1[i] += -cosine_grad(view1[i], anchor[i]) / (2 * tau) + expect / tau
        g2[i] += -cosine_grad(view2[i], anchor[i]) / (2 * tau) + p[i] * cosine_grad(view2[i], view1[i]) / tau
        for j in range(n):
            if j != i:
                g2[j] += p[j] * cosine_grad(view2[j], view1[i]) / tau
    return gh, g1, g2


@dataclass
class LossBreakdown:
    total: float
    bpr: float
    cl_interaction: float
    cl_social: float
    cl_item: float
    reg: float
    grad_user: np.ndarray
    grad_item: np.ndarray


def joint_loss(state: EmbeddingState, interaction: InteractionGraph, social: SocialNetwork,
               batch: BatchSample, weights: LossWeights, layers: int, epsilon: float,
               noise: ViewNoise | None, cl_kind: str = AC_INFONCE,
               cl_scale: tuple[float, float, float] | None = None) -> LossBreakdown:
    """BPR + weighted contrastive terms + L2 on the base tables, with full gradient.

    ``noise`` holds fixed unit-row noise directions, or is a callable building
    them from the propagated ``(interaction_users, social_users, items)``;
    when it is ``None`` the contrastive terms are skipped entirely. ``cl_scale`` overrides
    ``(lambda1, lambda2, lambda3)``.
    """
    rec = propagate_interaction(state, interaction, layers)
    soc = propagate_social(state, social, layers)
    bpr, g_ru, g_ri = bpr_loss(batch.users, batch.positives, batch.negatives, rec.users, rec.items)
    g_su = np.zeros_like(soc.users)

    lam = cl_scale if cl_scale is not None else (weights.lambda1, weights.lambda2, weights.lambda3)
    cl = [0.0, 0.0, 0.0]
    if callable(noise):
        noise = noise(rec.users, soc.users, rec.items)
    if noise is not None:
        users, items = batch.batch_users, batch.batch_items
        families = [
            (rec.users, noise.user_interaction, users, g_ru),
            (soc.users, noise.user_social, users, g_su),
            (rec.items, noise.item, items, g_ri),
        ]
        for k, (table, (d1, d2), rows, grad) in enumerate(families):
            anchor = table[rows]
            loss, g_h, g_1, g_2 = contrastive_loss(
                cl_kind, anchor, anchor - epsilon * d1[rows], anchor - epsilon * d2[rows], weights.tau)
            cl[k] = loss
            if lam[k]:
                # views are anchor minus a constant, so their gradients land on the anchor rows
                np.add.at(grad, rows, lam[k] * (g_h + g_1 + g_2))

    g_user, g_item = rec.backpropagate(g_ru, g_ri)
    g_user = g_user + soc.backpropagate(g_su)[0]
    reg = float(np.sum(state.user ** 2) + np.sum(state.item ** 2))
    g_user += 2.0 * weights.lambda_reg * state.user
    g_item += 2.0 * weights.lambda_reg * state.item
    total = bpr + lam[0] * cl[0] + lam[1] * cl[1] + lam[2] * cl[2] + weights.lambda_reg * reg
    return LossBreakdown(total, bpr, cl[0], cl[1], cl[2], weights.lambda_reg * reg, g_user, g_item)
