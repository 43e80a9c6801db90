"""Edge-list loading, per-user train/test splitting and noise injection.

Every edge array in this module is an ``(E, 2)`` int64 array. Raw datasets
carry external ids exactly as they appear in the files; a :class:`DatasetSplit`
carries contiguous internal ids ``[0, n_users)`` and ``[0, n_items)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, EmptyDatasetError


@dataclass(frozen=True)
class RawDataset:
    interactions: np.ndarray
    social_edges: np.ndarray

    @property
    def n_interactions(self) -> int:
        return len(self.interactions)

    @property
    def n_relations(self) -> int:
        return len(self.social_edges)


@dataclass(frozen=True)
class DatasetSplit:
    train: np.ndarray
    test: np.ndarray
    social: np.ndarray
    n_users: int
    n_items: int
    user_ids: np.ndarray
    item_ids: np.ndarray
    ratio: float
    seed: int
    noise_flags: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.noise_flags is not None and len(self.noise_flags) != len(self.train):
            raise DataError("noise_flags must have one entry per training edge")

    def internal_user(self, external: int) -> int:
        return int(self._user_index()[int(external)])

    def internal_item(self, external: int) -> int:
        return int(self._item_index()[int(external)])

    def external_user(self, internal: int) -> int:
        return int(self.user_ids[internal])

    def external_item(self, internal: int) -> int:
        return int(self.item_ids[internal])

    def _user_index(self) -> dict:
        cache = self.meta.setdefault("_user_index", None)
        if cache is None:
            cache = {int(u): k for k, u in enumerate(self.user_ids)}
            self.meta["_user_index"] = cache
        return cache

    def _item_index(self) -> dict:
        cache = self.meta.setdefault("_item_index", None)
        if cache is None:
            cache = {int(i): k for k, i in enumerate(self.item_ids)}
            self.meta["_item_index"] = cache
        return cache

    @property
    def n_noisy(self) -> int:
        return 0 if self.noise_flags is None else int(self.noise_flags.sum())


def _read_pairs(path: Path) -> np.ndarray:
    pairs = []
    saw_content = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            saw_content = True
            tokens = stripped.split()
            if len(tokens) < 2:
                raise DataError(f"{path}:{lineno}: expected two integer ids, got {stripped!r}")
            try:
                pairs.append((int(tokens[0]), int(tokens[1])))
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: non-integer id in {stripped!r}"
                ) from None
    if not saw_content:
        raise EmptyDatasetError(f"{path}: no edges found")
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _unique_rows(edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return edges.reshape(0, 2)
    return np.unique(edges, axis=0)


def canonical_social(edges: np.ndarray) -> np.ndarray:
    """Drop self-loops, order each pair as ``u < v`` and deduplicate."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    edges = edges[edges[:, 0] != edges[:, 1]]
    return _unique_rows(np.sort(edges, axis=1))


def load_edge_lists(interaction_path, social_path) -> RawDataset:
    interactions = _unique_rows(_read_pairs(Path(interaction_path)))
    social = canonical_social(_read_pairs(Path(social_path)))
    return RawDataset(interactions=interactions, social_edges=social)


def _stratified_counts(n: np.ndarray, ratio: float) -> np.ndarray:
    # round half up, and never leave a user without a training edge
    return np.maximum(1, np.floor(ratio * n + 0.5).astype(np.int64))


def split_train_test(raw: RawDataset, ratio: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Per-user stratified random split with contiguous id remapping."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    if raw.n_interactions == 0:
        raise EmptyDatasetError("no interactions to split")

    user_ids = np.unique(np.concatenate([raw.interactions[:, 0], raw.social_edges.ravel()]))
    item_ids = np.unique(raw.interactions[:, 1])
    users = np.searchsorted(user_ids, raw.interactions[:, 0])
    items = np.searchsorted(item_ids, raw.interactions[:, 1])
    social = np.searchsorted(user_ids, raw.social_edges).reshape(-1, 2)

    rng = np.random.default_rng(seed)
    keys = rng.random(len(users))
    order = np.lexsort((keys, users))
    users, items = users[order], items[order]

    counts = np.bincount(users, minlength=len(user_ids))
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rank = np.arange(len(users)) - starts[users]
    in_train = rank < _stratified_counts(counts, ratio)[users]

    edges = np.stack([users, items], axis=1)
    return DatasetSplit(
        train=_unique_rows(edges[in_train]),
        test=_unique_rows(edges[~in_train]),
        social=canonical_social(social),
        n_users=len(user_ids),
        n_items=len(item_ids),
        user_ids=user_ids,
        item_ids=item_ids,
        ratio=float(ratio),
        seed=int(seed),
    )


def inject_interaction_noise(split: DatasetSplit, ratio: float, seed: int = 0) -> DatasetSplit:
    """Append ``floor(ratio * |train|)`` fabricated, flagged training interactions.

    Fabricated pairs are uniform over user-item pairs absent from both train
    and test.
    """
    if not 0.0 <= ratio < 1.0:
        raise ConfigError(f"noise ratio must lie in [0, 1), got {ratio}")
    flags = split.noise_flags
    if flags is None:
        flags = np.zeros(len(split.train), dtype=bool)
    count = math.floor(ratio * len(split.train))
    if count == 0:
        return replace(split, noise_flags=flags, meta=dict(split.meta))

    n_items = split.n_items
    observed = np.concatenate([
        split.train[:, 0] * n_items + split.train[:, 1],
        split.test[:, 0] * n_items + split.test[:, 1],
    ])
    free = split.n_users * n_items - len(np.unique(observed))
    if count > free:
        raise ConfigError(f"cannot fabricate {count} interactions, only {free} unobserved pairs")

    rng = np.random.default_rng(seed)
    chosen = np.empty(0, dtype=np.int64)
    while len(chosen) < count:
        draw = rng.integers(0, split.n_users * n_items, size=2 * (count - len(chosen)) + 16)
        draw = draw[~np.isin(draw, observed)]
        _, first = np.unique(draw, return_index=True)
        draw = draw[np.sort(first)]
        draw = draw[~np.isin(draw, chosen)]
        chosen = np.concatenate([chosen, draw[: count - len(chosen)]])

    fake = np.stack([chosen // n_items, chosen % n_items], axis=1)
    meta = {k: v for k, v in split.meta.items() if not k.startswith("_")}
    meta.update(noise_ratio=ratio, noise_seed=seed)
    return replace(
        split,
        train=np.concatenate([split.train, fake]),
        noise_flags=np.concatenate([flags, np.ones(count, dtype=bool)]),
        meta=meta,
    )


def _write_edges(path: Path, edges: np.ndarray, flags: np.ndarray | None = None) -> None:
    with open(path, "w") as fh:
        if flags is None:
            for u, v in edges:
                fh.write(f"{u} {v}\n")
        else:
            for (u, v), f in zip(edges, flags):
                fh.write(f"{u} {v} {int(f)}\n")


def _read_edges(path: Path, with_flags: bool = False):
    rows = []
    with open(path) as fh:
        for line in fh:
            tokens = line.split()
            if tokens and not tokens[0].startswith("#"):
                rows.append([int(t) for t in tokens[: 3 if with_flags else 2]])
    if not rows:
        return (np.zeros((0, 2), np.int64), None) if with_flags else np.zeros((0, 2), np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    if not with_flags:
        return arr
    flags = arr[:, 2].astype(bool) if arr.shape[1] == 3 else None
    return arr[:, :2], flags


def read_kv(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: expected 'key = value', got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def save_split(split: DatasetSplit, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_edges(directory / "train.txt", split.train, split.noise_flags)
    _write_edges(directory / "test.txt", split.test)
    _write_edges(directory / "social.txt", split.social)
    np.savetxt(directory / "users.txt", split.user_ids, fmt="%d")
    np.savetxt(directory / "items.txt", split.item_ids, fmt="%d")
    meta = {"n_users": split.n_users, "n_items": split.n_items, "ratio": split.ratio, "seed": split.seed}
    meta.update({k: v for k, v in split.meta.items() if not k.startswith("_")})
    with open(directory / "meta.txt", "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key} = {value}\n")
    return directory


def load_split(directory) -> DatasetSplit:
    directory = Path(directory)
    if not (directory / "meta.txt").exists():
        raise DataError(f"{directory}: not a split directory (meta.txt missing)")
    meta = read_kv(directory / "meta.txt")
    train, flags = _read_edges(directory / "train.txt", with_flags=True)
    extra = {k: float(v) for k, v in meta.items() if k in ("noise_ratio", "noise_seed")}
    return DatasetSplit(
        train=train,
        test=_read_edges(directory / "test.txt"),
        social=_read_edges(directory / "social.txt"),
        n_users=int(meta["n_users"]),
        n_items=int(meta["n_items"]),
        user_ids=np.loadtxt(directory / "users.txt", dtype=np.int64, ndmin=1),
        item_ids=np.loadtxt(directory / "items.txt", dtype=np.int64, ndmin=1),
        ratio=float(meta["ratio"]),
        seed=int(meta["seed"]),
        noise_flags=flags,
        meta=extra,
    )
