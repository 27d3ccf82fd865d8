"""Photo authorship prediction toolkit.

Learns the probability that a user authored a photo of an item, ranks an
item's photos with it as personalized visual explanations, and ships the
full dataset-construction, training, baseline and evaluation pipeline on
precomputed image feature vectors.
"""

from .corpus import Corpus, FeatureStore, Review, StatsReport, corpus_stats, load_features, load_reviews
from .dataset import (
    LabeledPair,
    TestCase,
    TrainSet,
    build_test_cases,
    build_train_set,
    filter_corpus,
    make_dev_split,
    split_holdout,
)
from .model import ElvisModel, ModelConfig, backward, forward, init_model, load_checkpoint, predict_scores, save_checkpoint
from .training import AdamState, TrainConfig, adam_step, bce_loss, grid_search, lr_at, train

__all__ = [
    "AdamState",
    "Corpus",
    "ElvisModel",
    "FeatureStore",
    "LabeledPair",
    "ModelConfig",
    "Review",
    "StatsReport",
    "TestCase",
    "TrainConfig",
    "TrainSet",
    "adam_step",
    "backward",
    "bce_loss",
    "build_test_cases",
    "build_train_set",
    "corpus_stats",
    "filter_corpus",
    "forward",
    "grid_search",
    "init_model",
    "load_checkpoint",
    "load_features",
    "load_reviews",
    "lr_at",
    "make_dev_split",
    "predict_scores",
    "save_checkpoint",
    "split_holdout",
    "train",
]
