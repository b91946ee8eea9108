"""
Concentric rings driver.

Class c lies on a ring of radius c + 1 with radial Gaussian noise; the task
is not linearly separable, so prediction depth spreads over several probes.
"""

import logging

import numpy as np

from prune_lab.core.dataset import Dataset
from prune_lab.core.driver import DatasetDriver
from prune_lab.core.errors import ParameterError

logger = logging.getLogger(__name__)


def make_rings(class_count: int, per_class: int, noise_sigma: float, seed: int,
               split: str = "train") -> Dataset:
    """
    Generate concentric rings in the plane.

    Args:
        class_count: Number of rings C (>= 2)
        per_class: Samples per ring
        noise_sigma: Std of the radial noise
        seed: Generator seed
        split: Split tag

    Returns:
        Dataset with 2-d features
    """
    if class_count < 2:
        raise ParameterError("make_rings needs at least two classes")
    if per_class < 1:
        raise ParameterError("per_class must be positive")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be nonnegative")

    rng = np.random.default_rng(seed)
    blocks = []
    for c in range(class_count):
        angles = rng.uniform(0.0, 2.0 * np.pi, size=per_class)
        radius = np.full(per_class, float(c + 1))
        if noise_sigma > 0:
            radius = radius + rng.normal(0.0, noise_sigma, size=per_class)
        blocks.append(np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1))
    labels = np.repeat(np.arange(class_count), per_class)
    return Dataset(np.concatenate(blocks), labels, class_count, split=split)


class RingsDriver(DatasetDriver):
    """Driver for the concentric rings task."""

    def __init__(self, basic_data_set: dict):
        super().__init__(basic_data_set)
        defaults = {
            "class_count": 3,
            "per_class": 100,
            "test_per_class": 50,
            "noise_sigma": 0.1,
            "seed": 0,
        }
        for k, v in defaults.items():
            self.basic_data_set.setdefault(k, v)
            setattr(self, k, self.basic_data_set[k])

    def load_data(self, split: str = "train", seed: int = None) -> Dataset:
        per_class = self.per_class if split == "train" else self.test_per_class
        self._data = make_rings(self.class_count, per_class, self.noise_sigma,
                                self.split_seed(split, seed), split=split)
        logger.info(f"Generated {len(self._data)} ring samples ({split})")
        return self._data
