import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcdsr.errors import GraphError
from dcdsr.graph import InteractionGraph, SocialNetwork, apply_mask, symmetric_norm_coefficient, write_edges

from conftest import random_graphs


def test_adjacency_and_degrees(graphs):
    inter, social = graphs
    dense = np.zeros((inter.n_users, inter.n_items))
    dense[inter.edges[:, 0], inter.edges[:, 1]] = 1
    for u in range(inter.n_users):
        assert inter.items_of(u).tolist() == np.flatnonzero(dense[u]).tolist()
    for i in range(inter.n_items):
        assert inter.users_of(i).tolist() == np.flatnonzero(dense[:, i]).tolist()
    assert np.array_equal(inter.user_degrees, dense.sum(1))
    assert social.degrees.sum() == 2 * social.edge_count


def test_norm_adj_matches_dense(graphs):
    inter, social = graphs
    r = np.zeros((inter.n_users, inter.n_items))
    r[inter.edges[:, 0], inter.edges[:, 1]] = 1
    du, di = r.sum(1), r.sum(0)
    expect = r / np.sqrt(np.outer(du, di))
    assert np.allclose(inter.norm_adj.toarray(), expect, atol=1e-15)
    s = social.norm_adj.toarray()
    assert np.allclose(s, s.T)


def test_norm_coefficient(graphs):
    inter, _ = graphs
    u, i = inter.edges[0]
    assert symmetric_norm_coefficient(inter, u, i) == pytest.approx(
        1 / np.sqrt(inter.user_degrees[u] * inter.item_degrees[i]))
    lonely = InteractionGraph(np.array([[0, 0]]), 2, 2)
    with pytest.raises(GraphError):
        symmetric_norm_coefficient(lonely, 1, 1)


@pytest.mark.parametrize("edges", [[[0, 5]], [[-1, 0]], [[0, 0], [0, 0]]])
def test_interaction_rejects_bad_edges(edges):
    with pytest.raises(GraphError):
        InteractionGraph(edges, 2, 3)


@pytest.mark.parametrize("edges", [[[1, 1]], [[0, 1], [1, 0]], [[0, 9]]])
def test_social_rejects_bad_edges(edges):
    with pytest.raises(GraphError):
        SocialNetwork(edges, 3)


def test_edges_are_read_only(graphs):
    inter, social = graphs
    with pytest.raises(ValueError):
        inter.edges[0, 0] = 3
    with pytest.raises(ValueError):
        social.neighbors[0] = 1


@given(st.integers(0, 2**32 - 1))
def test_mask_gives_subset(seed):
    rng = np.random.default_rng(seed)
    inter, social = random_graphs(rng, 6, 7)
    for g in (inter, social):
        mask = rng.random(g.edge_count) < 0.5
        sub = apply_mask(g, mask)
        assert sub.edge_count == mask.sum()
        assert set(map(tuple, sub.edges.tolist())) <= set(map(tuple, g.edges.tolist()))
    assert apply_mask(inter, np.ones(inter.edge_count, bool)) == inter


def test_mask_length_checked(graphs):
    with pytest.raises(GraphError):
        apply_mask(graphs[0], np.ones(3, bool))


def test_write_edges(tmp_path, graphs):
    write_edges(graphs[1], tmp_path / "s.txt")
    back = np.loadtxt(tmp_path / "s.txt", dtype=np.int64, ndmin=2)
    assert SocialNetwork(back, graphs[1].n_users) == graphs[1]
