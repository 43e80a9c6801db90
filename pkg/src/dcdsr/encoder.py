"""Layer-averaged LightGCN propagation over the interaction graph and the social network.

Propagation plus mean pooling is a linear map built from a symmetric
normalized adjacency, so it is self-adjoint: the gradient with respect to the
base tables is the same propagation applied to the output gradient.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, GraphError
from .graph import InteractionGraph, SocialNetwork

CHECKPOINT_MAGIC = int.from_bytes(b"DCDSREMB", "little")
CHECKPOINT_VERSION = 1


@dataclass
class EmbeddingState:
    user: np.ndarray
    item: np.ndarray

    def __post_init__(self):
        if self.user.ndim != 2 or self.item.ndim != 2 or self.user.shape[1] != self.item.shape[1]:
            raise ValueError("user and item tables must be 2-D with a shared width")
        if self.user.shape[1] == 0:
            raise ValueError("embedding width must be positive")

    @property
    def dim(self) -> int:
        return self.user.shape[1]

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.user.copy(), self.item.copy())


@dataclass
class PropagatedEmbeddings:
    users: np.ndarray
    items: np.ndarray | None
    layers: int
    graph: InteractionGraph | SocialNetwork | None

    def backpropagate(self, grad_users, grad_items=None):
        """Pull output gradients back onto the base tables.

        Returns ``(grad_user_table, grad_item_table)``; the item part is
        ``None`` for the social encoder.
        """
        if self.graph is None:
            raise RuntimeError("no cached forward pass to backpropagate through")
        if isinstance(self.graph, SocialNetwork):
            return _social_pass(np.asarray(grad_users, dtype=float), self.graph, self.layers), None
        if grad_items is None:
            grad_items = np.zeros((self.graph.n_items, np.shape(grad_users)[1]))
        return _interaction_pass(np.asarray(grad_users, dtype=float),
                                 np.asarray(grad_items, dtype=float), self.graph, self.layers)


def _interaction_pass(users, items, graph: InteractionGraph, layers: int):
    adj, adj_t = graph.norm_adj, graph.norm_adj_t
    acc_u, acc_i = users.copy(), items.copy()
    cur_u, cur_i = users, items
    for _ in range(layers):
        cur_u, cur_i = adj @ cur_i, adj_t @ cur_u
        acc_u += cur_u
        acc_i += cur_i
    return acc_u / (layers + 1), acc_i / (layers + 1)


def _social_pass(users, net: SocialNetwork, layers: int):
    adj = net.norm_adj
    acc, cur = users.copy(), users
    for _ in range(layers):
        cur = adj @ cur
        acc += cur
    return acc / (layers + 1)


def propagate_interaction(state: EmbeddingState, graph: InteractionGraph, layers: int) -> PropagatedEmbeddings:
    if state.user.shape[0] != graph.n_users or state.item.shape[0] != graph.n_items:
        raise GraphError(
            f"tables {state.user.shape[0]}x{state.item.shape[0]} do not match graph "
            f"{graph.n_users}x{graph.n_items}")
    if layers < 0:
        raise ValueError("layer count must be non-negative")
    users, items = _interaction_pass(state.user, state.item, graph, layers)
    return PropagatedEmbeddings(users, items, layers, graph)


def propagate_social(state: EmbeddingState, net: SocialNetwork, layers: int) -> PropagatedEmbeddings:
    # item table is accepted for signature symmetry; user-user passing never reads it
    if state.user.shape[0] != net.n_users:
        raise GraphError(f"user table has {state.user.shape[0]} rows, network has {net.n_users}")
    if layers < 0:
        raise ValueError("layer count must be non-negative")
    return PropagatedEmbeddings(_social_pass(state.user, net, layers), None, layers, net)


def save_embeddings(path, state: EmbeddingState) -> None:
    """Binary checkpoint: five little-endian int64 header words, then f64 rows."""
    m, d = state.user.shape
    n = state.item.shape[0]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<5q", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, m, n, d))
        fh.write(np.ascontiguousarray(state.user, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.item, dtype="<f8").tobytes())


def load_embeddings(path) -> EmbeddingState:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: checkpoint not found")
    raw = path.read_bytes()
    if len(raw) < 40:
        raise DataError(f"{path}: truncated checkpoint header")
    magic, version, m, n, d = struct.unpack("<5q", raw[:40])
    if magic != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: bad checkpoint magic")
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    body = np.frombuffer(raw[40:], dtype="<f8")
    if body.size != (m + n) * d:
        raise DataError(f"{path}: expected {(m + n) * d} values, found {body.size}")
    return EmbeddingState(body[: m * d].reshape(m, d).copy(), body[m * d:].reshape(n, d).copy())
