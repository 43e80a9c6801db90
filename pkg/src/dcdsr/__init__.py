"""Dual-domain denoising social recommender: structure pruning plus collaborative perturbation."""
from .config import TrainConfig
from .data import DatasetSplit, RawDataset, inject_interaction_noise, load_edge_lists, load_split, save_split, split_train_test
from .encoder import EmbeddingState, load_embeddings, propagate_interaction, propagate_social, save_embeddings
from .evaluate import MetricsReport, evaluate_all_ranking, real_plus_n
from .graph import InteractionGraph, SocialNetwork
from .trainer import Trainer, TrainResult, save_checkpoint, train

__all__ = [
    "TrainConfig", "DatasetSplit", "RawDataset", "inject_interaction_noise", "load_edge_lists",
    "load_split", "save_split", "split_train_test", "EmbeddingState", "load_embeddings",
    "propagate_interaction", "propagate_social", "save_embeddings", "MetricsReport",
    "evaluate_all_ranking", "real_plus_n", "InteractionGraph", "SocialNetwork", "Trainer",
    "TrainResult", "save_checkpoint", "train",
]
