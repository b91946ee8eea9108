"""
Blobs + rings mixture driver.

Rings occupy classes 0..R-1 around the origin; blobs occupy classes
R..R+B-1, shifted along the first axis so the two families never overlap.
The mixture gives an easy and a hard sub-task in one dataset.
"""

import logging

import numpy as np

from prune_lab.core.dataset import Dataset
from prune_lab.core.driver import DatasetDriver
from prune_lab.drivers.blobs_driver import make_blobs
from prune_lab.drivers.rings_driver import make_rings

logger = logging.getLogger(__name__)


def make_mixture(ring_classes: int, blob_classes: int, per_class: int, noise_sigma: float,
                 separation: float, seed: int, split: str = "train") -> Dataset:
    rings = make_rings(ring_classes, per_class, noise_sigma, seed, split=split)
    blobs = make_blobs(blob_classes, per_class, 2, separation, seed + 7919, split=split)
    offset = np.zeros(2)
    offset[0] = ring_classes + 2.0 + separation
    features = np.concatenate([rings.features, blobs.features + offset.astype(np.float32)])
    labels = np.concatenate([rings.labels, blobs.labels + ring_classes])
    return Dataset(features, labels, ring_classes + blob_classes, split=split)


class MixtureDriver(DatasetDriver):
    """Driver for the blobs + rings mixture used by the desk experiment."""

    def __init__(self, basic_data_set: dict):
        super().__init__(basic_data_set)
        defaults = {
            "ring_classes": 3,
            "blob_classes": 3,
            "per_class": 100,
            "test_per_class": 50,
            "noise_sigma": 0.15,
            "separation": 3.0,
            "seed": 0,
        }
        for k, v in defaults.items():
            self.basic_data_set.setdefault(k, v)
            setattr(self, k, self.basic_data_set[k])

    def load_data(self, split: str = "train", seed: int = None) -> Dataset:
        per_class = self.per_class if split == "train" else self.test_per_class
        self._data = make_mixture(self.ring_classes, self.blob_classes, per_class,
                                  self.noise_sigma, self.separation,
                                  self.split_seed(split, seed), split=split)
        logger.info(f"Generated {len(self._data)} mixture samples ({split})")
        return self._data
