"""Planted-community social recommendation data with flagged noise.

Users and items belong to one of several communities and carry latent taste
vectors. Clean interactions are drawn inside the user's community with
probability rising in latent affinity and item popularity; friendships are
drawn inside the community, favouring similar tastes. Noise edges always
cross communities, so each fabricated edge is known.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .data import DatasetSplit, canonical_social


@dataclass
class PlantedDataset:
    split: DatasetSplit
    user_community: np.ndarray
    item_community: np.ndarray
    social_noise_flags: np.ndarray


def _labels(n: int, parts: int) -> np.ndarray:
    return np.arange(n) * parts // n


def planted_communities(n_users: int = 200, n_items: int = 400, n_communities: int = 2,
                        latent_dim: int = 8, sharpness: float = 2.0, popularity_std: float = 1.0,
                        mean_interactions: float = 20.0, min_interactions: int = 5,
                        friends_per_user: int = 4, homophily: float = 2.0,
                        interaction_noise: float = 0.2, social_noise: float = 0.2,
                        test_ratio: float = 0.2, seed: int = 0) -> PlantedDataset:
    """Build a split whose training set holds ``interaction_noise`` fabricated edges.

    Noise shares are fractions of the final (noisy) training and social edge
    sets, so they are also the base rates of a random edge removal.
    """
    rng = np.random.default_rng(seed)
    user_comm = _labels(n_users, n_communities)
    item_comm = _labels(n_items, n_communities)
    z_user = rng.standard_normal((n_users, latent_dim))
    z_item = rng.standard_normal((n_items, latent_dim))
    popularity = popularity_std * rng.standard_normal(n_items)
    degrees = np.clip(np.round(rng.lognormal(np.log(mean_interactions), 0.5, n_users)),
                      min_interactions, None).astype(int)

    train, test = [], []
    for u in range(n_users):
        own = np.flatnonzero(item_comm == user_comm[u])
        logits = sharpness * z_item[own] @ z_user[u] / np.sqrt(latent_dim) + popularity[own]
        items = rng.choice(own, size=min(degrees[u], len(own)), replace=False, p=softmax(logits))
        n_test = int(round(test_ratio * len(items)))
        test += [(u, i) for i in items[:n_test]]
        train += [(u, i) for i in items[n_test:]]
    train = np.array(train, dtype=np.int64)
    test = np.array(test, dtype=np.int64)

    n_fake = int(round(interaction_noise / (1.0 - interaction_noise) * len(train)))
    taken = set(map(tuple, train.tolist())) | set(map(tuple, test.tolist()))
    fake = []
    while len(fake) < n_fake:
        u = int(rng.integers(n_users))
        i = int(rng.choice(np.flatnonzero(item_comm != user_comm[u])))
        if (u, i) not in taken:
            taken.add((u, i))
            fake.append((u, i))
    fake = np.array(fake, dtype=np.int64).reshape(-1, 2)

    friends = []
    for u in range(n_users):
        peers = np.flatnonzero((user_comm == user_comm[u]) & (np.arange(n_users) != u))
        affinity = homophily * z_user[peers] @ z_user[u] / np.sqrt(latent_dim)
        picks = rng.choice(peers, size=min(friends_per_user // 2, len(peers)), replace=False,
                           p=softmax(affinity))
        friends += [(u, int(v)) for v in picks]
    clean_social = canonical_social(np.array(friends, dtype=np.int64))
    n_bad = int(round(social_noise / (1.0 - social_noise) * len(clean_social)))
    existing = set(map(tuple, clean_social.tolist()))
    bad = []
    while len(bad) < n_bad:
        u, v = (int(x) for x in rng.integers(0, n_users, size=2))
        key = (min(u, v), max(u, v))
        if user_comm[u] != user_comm[v] and key not in existing:
            existing.add(key)
            bad.append(key)
    social = np.concatenate([clean_social, np.array(bad, dtype=np.int64).reshape(-1, 2)])
    social_flags = np.concatenate([np.zeros(len(clean_social), bool), np.ones(len(bad), bool)])

    split = DatasetSplit(
        train=np.concatenate([train, fake]),
        test=test,
        social=social,
        n_users=n_users,
        n_items=n_items,
        user_ids=np.arange(n_users),
        item_ids=np.arange(n_items),
        ratio=1.0 - test_ratio,
        seed=seed,
        noise_flags=np.concatenate([np.zeros(len(train), bool), np.ones(len(fake), bool)]),
    )
    return PlantedDataset(split, user_comm, item_comm, social_flags)
