"""Batch photo feature extraction with a frozen convolutional network."""

from .extract import FeatureExtractor, FeaturizeJob, run_job
from .writer import write_feature_file

__all__ = ["FeatureExtractor", "FeaturizeJob", "run_job", "write_feature_file"]
