"""Collaborative embedding perturbation for contrastive views.

Noise for one embedding family is built from the rows of another family
(shuffled), made non-negative, normalized per row and then given the sign
pattern of the target, so each perturbed row moves exactly ``epsilon`` and
stays in the target's hyperoctant. Noise is a constant for differentiation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COLLABORATIVE = "collaborative"
RANDOM = "random"


def _signed_unit_rows(target: np.ndarray, raw: np.ndarray) -> np.ndarray:
    mag = np.abs(raw)
    norms = np.linalg.norm(mag, axis=1, keepdims=True)
    unit = np.divide(mag, norms, out=np.zeros_like(mag), where=norms > 0)
    return np.sign(target) * unit


def collaborative_noise(target: np.ndarray, source: np.ndarray, permutation: np.ndarray) -> np.ndarray:
    if target.shape != source.shape:
        raise ValueError(f"target {target.shape} and source {source.shape} differ in shape")
    permutation = np.asarray(permutation)
    if permutation.shape != (len(source),):
        raise ValueError("permutation must index every source row once")
    return _signed_unit_rows(target, source[permutation])


def gaussian_noise(target: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return _signed_unit_rows(target, rng.standard_normal(target.shape))


def _two_views(target, source, epsilon, rng):
    d1 = collaborative_noise(target, source, rng.permutation(len(source)))
    d2 = collaborative_noise(target, source, rng.permutation(len(source)))
    return target - epsilon * d1, target - epsilon * d2


def perturb_user_social(social_users, interaction_users, epsilon: float, rng: np.random.Generator):
    """Two views of the social-domain user table, noised by interaction-domain rows."""
    return _two_views(social_users, interaction_users, epsilon, rng)


def perturb_user_interaction(interaction_users, social_users, epsilon: float, rng: np.random.Generator):
    """Two views of the interaction-domain user table, noised by social-domain rows."""
    return _two_views(interaction_users, social_users, epsilon, rng)


def perturb_item(items, epsilon: float, rng: np.random.Generator):
    return _two_views(items, items, epsilon, rng)


def random_noise_variant(table, epsilon: float, rng: np.random.Generator):
    return table - epsilon * gaussian_noise(table, rng), table - epsilon * gaussian_noise(table, rng)


@dataclass
class ViewNoise:
    """Unit-row noise directions for the two views of each embedding family."""

    user_interaction: tuple[np.ndarray, np.ndarray]
    user_social: tuple[np.ndarray, np.ndarray]
    item: tuple[np.ndarray, np.ndarray]


def sample_view_noise(interaction_users, social_users, items, rng: np.random.Generator,
                      mode: str = COLLABORATIVE) -> ViewNoise:
    if mode == COLLABORATIVE:
        def pair(target, source):
            return tuple(collaborative_noise(target, source, rng.permutation(len(source)))
                         for _ in range(2))
        return ViewNoise(
            user_interaction=pair(interaction_users, social_users),
            user_social=pair(social_users, interaction_users),
            item=pair(items, items),
        )
    if mode == RANDOM:
        def pair(target, _source):
            return gaussian_noise(target, rng), gaussian_noise(target, rng)
        return ViewNoise(
            user_interaction=pair(interaction_users, None),
            user_social=pair(social_users, None),
            item=pair(items, None),
        )
    raise ValueError(f"unknown perturbation mode {mode!r}")
