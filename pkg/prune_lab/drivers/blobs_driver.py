"""
Gaussian blobs driver.

Unit-covariance clusters whose class means are at least `separation` apart.
"""

import logging

import numpy as np

from prune_lab.core.dataset import Dataset
from prune_lab.core.driver import DatasetDriver
from prune_lab.core.errors import ParameterError

logger = logging.getLogger(__name__)


def blob_means(class_count: int, dim: int, separation: float) -> np.ndarray:
    """
    Class means with pairwise distance >= separation.

    In one dimension the means sit on a line; otherwise on a circle in the
    first two coordinates whose adjacent chord equals the separation.
    """
    means = np.zeros((class_count, dim))
    if dim == 1 or class_count == 1:
        means[:, 0] = np.arange(class_count) * separation
        return means
    radius = separation / (2.0 * np.sin(np.pi / class_count)) if class_count > 2 else separation / 2.0
    angles = 2.0 * np.pi * np.arange(class_count) / class_count
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    return means


def make_blobs(class_count: int, per_class: int, dim: int, separation: float, seed: int,
               split: str = "train") -> Dataset:
    """
    Generate Gaussian clusters.

    Args:
        class_count: Number of classes C
        per_class: Samples per class
        dim: Feature dimension
        separation: Minimum distance between class means
        seed: Generator seed (same seed gives a bit-identical dataset)
        split: Split tag

    Returns:
        Dataset with C * per_class samples in class-major order
    """
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    if class_count < 1 or per_class < 1:
        raise ParameterError("class_count and per_class must be positive")
    if separation <= 0:
        raise ParameterError("separation must be positive")

    rng = np.random.default_rng(seed)
    means = blob_means(class_count, dim, separation)
    features = np.concatenate([
        rng.normal(0.0, 1.0, size=(per_class, dim)) + means[c] for c in range(class_count)
    ])
    labels = np.repeat(np.arange(class_count), per_class)
    return Dataset(features, labels, class_count, split=split)


class BlobsDriver(DatasetDriver):
    """Driver for the Gaussian blobs task."""

    def __init__(self, basic_data_set: dict):
        """
        Initialize blobs driver.

        Args:
            basic_data_set: Configuration dict with class_count, per_class,
                test_per_class, dim, separation, seed
        """
        super().__init__(basic_data_set)
        defaults = {
            "class_count": 4,
            "per_class": 100,
            "test_per_class": 50,
            "dim": 2,
            "separation": 4.0,
            "seed": 0,
        }
        for k, v in defaults.items():
            self.basic_data_set.setdefault(k, v)
            setattr(self, k, self.basic_data_set[k])

    def load_data(self, split: str = "train", seed: int = None) -> Dataset:
        per_class = self.per_class if split == "train" else self.test_per_class
        self._data = make_blobs(self.class_count, per_class, self.dim, self.separation,
                                self.split_seed(split, seed), split=split)
        logger.info(f"Generated {len(self._data)} blob samples ({split})")
        return self._data
