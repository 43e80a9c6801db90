"""Immutable adjacency structures for the interaction graph and social network.

Both graphs keep their edge list in the order given at construction, so an
edge mask is simply a boolean array aligned with ``graph.edges``. Social edges
are undirected and stored once, as ``(u, v)`` with ``u < v``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import GraphError


def _csr_index(rows: np.ndarray, cols: np.ndarray, n_rows: int):
    order = np.lexsort((cols, rows))
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return indptr, cols[order], order


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_range(edges: np.ndarray, bounds: tuple[int, int], what: str) -> None:
    if len(edges) == 0:
        return
    if edges.min() < 0 or edges[:, 0].max() >= bounds[0] or edges[:, 1].max() >= bounds[1]:
        raise GraphError(f"{what} id out of range for shape {bounds}")


def _check_unique(edges: np.ndarray, width: int, what: str) -> None:
    codes = edges[:, 0] * width + edges[:, 1]
    if len(np.unique(codes)) != len(codes):
        raise GraphError(f"duplicate {what} edge; deduplicate before building the graph")


class InteractionGraph:
    """Bipartite user-item graph with both adjacency directions."""

    def __init__(self, edges, n_users: int, n_items: int):
        edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        _check_range(edges, (n_users, n_items), "interaction")
        _check_unique(edges, n_items, "interaction")
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.edges = _frozen(edges)
        users, items = edges[:, 0], edges[:, 1]
        self.user_indptr, self.user_items, self.user_edge_ids = map(
            _frozen, _csr_index(users, items, n_users))
        self.item_indptr, self.item_users, self.item_edge_ids = map(
            _frozen, _csr_index(items, users, n_items))
        self.user_degrees = _frozen(np.diff(self.user_indptr))
        self.item_degrees = _frozen(np.diff(self.item_indptr))
        self._norm_adj = None
        self._norm_adj_t = None

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def items_of(self, user: int) -> np.ndarray:
        return self.user_items[self.user_indptr[user]:self.user_indptr[user + 1]]

    def users_of(self, item: int) -> np.ndarray:
        return self.item_users[self.item_indptr[item]:self.item_indptr[item + 1]]

    @property
    def norm_adj(self) -> sp.csr_matrix:
        """``D_u^{-1/2} R D_i^{-1/2}`` as an ``n_users x n_items`` CSR matrix."""
        if self._norm_adj is None:
            users, items = self.edges[:, 0], self.edges[:, 1]
            values = 1.0 / np.sqrt(self.user_degrees[users] * self.item_degrees[items].astype(np.float64))
            self._norm_adj = sp.csr_matrix(
                (values, (users, items)), shape=(self.n_users, self.n_items))
        return self._norm_adj

    @property
    def norm_adj_t(self) -> sp.csr_matrix:
        if self._norm_adj_t is None:
            self._norm_adj_t = self.norm_adj.T.tocsr()
        return self._norm_adj_t

    def __eq__(self, other):
        if not isinstance(other, InteractionGraph):
            return NotImplemented
        return (self.n_users, self.n_items) == (other.n_users, other.n_items) and np.array_equal(
            self.edges, other.edges)

    def __repr__(self):
        return f"InteractionGraph(users={self.n_users}, items={self.n_items}, edges={self.edge_count})"


class SocialNetwork:
    """Undirected user-user graph without self-loops."""

    def __init__(self, edges, n_users: int):
        edges = np.sort(np.array(edges, dtype=np.int64).reshape(-1, 2), axis=1)
        _check_range(edges, (n_users, n_users), "social")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self-loop in social network")
        _check_unique(edges, n_users, "social")
        self.n_users = int(n_users)
        self.edges = _frozen(edges)
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        self.indptr, self.neighbors, _ = map(_frozen, _csr_index(rows, cols, n_users))
        self.degrees = _frozen(np.diff(self.indptr))
        self._norm_adj = None

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors_of(self, user: int) -> np.ndarray:
        return self.neighbors[self.indptr[user]:self.indptr[user + 1]]

    @property
    def norm_adj(self) -> sp.csr_matrix:
        """Symmetric ``D^{-1/2} S D^{-1/2}``."""
        if self._norm_adj is None:
            u, v = self.edges[:, 0], self.edges[:, 1]
            w = 1.0 / np.sqrt(self.degrees[u] * self.degrees[v].astype(np.float64))
            self._norm_adj = sp.csr_matrix(
                (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
                shape=(self.n_users, self.n_users))
        return self._norm_adj

    def __eq__(self, other):
        if not isinstance(other, SocialNetwork):
            return NotImplemented
        return self.n_users == other.n_users and np.array_equal(self.edges, other.edges)

    def __repr__(self):
        return f"SocialNetwork(users={self.n_users}, edges={self.edge_count})"


def build_interaction_graph(edges, n_users: int, n_items: int) -> InteractionGraph:
    return InteractionGraph(edges, n_users, n_items)


def build_social_network(edges, n_users: int) -> SocialNetwork:
    return SocialNetwork(edges, n_users)


def apply_mask(graph, mask):
    """Return a new graph holding only the edges whose flag is true."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (graph.edge_count,):
        raise GraphError(f"mask length {mask.shape} does not match {graph.edge_count} edges")
    if isinstance(graph, InteractionGraph):
        return InteractionGraph(graph.edges[mask], graph.n_users, graph.n_items)
    if isinstance(graph, SocialNetwork):
        return SocialNetwork(graph.edges[mask], graph.n_users)
    raise TypeError(f"cannot mask {type(graph).__name__}")


def symmetric_norm_coefficient(graph, u: int, x: int) -> float:
    """``1 / sqrt(deg(u) * deg(x))`` for user ``u`` and item (or user) ``x``."""
    if isinstance(graph, InteractionGraph):
        du, dx = graph.user_degrees[u], graph.item_degrees[x]
    else:
        du, dx = graph.degrees[u], graph.degrees[x]
    if du == 0 or dx == 0:
        raise GraphError(f"endpoint with zero degree ({u}: {du}, {x}: {dx}); no such edge")
    return 1.0 / np.sqrt(float(du) * float(dx))


def write_edges(graph, path) -> None:
    """Dump a graph in the plain ``a b`` per line edge-list format."""
    with open(path, "w") as fh:
        for a, b in graph.edges:
            fh.write(f"{a} {b}\n")
