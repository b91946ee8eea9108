"""
Dataset driver base class.

Provides the abstract interface for generating or loading a Dataset.
"""

from abc import ABC, abstractmethod

from prune_lab.core.dataset import Dataset


class DatasetDriver(ABC):
    """Abstract base class for dataset providers."""

    def __init__(self, basic_data_set: dict):
        """
        Initialize driver with configuration.

        Args:
            basic_data_set: Configuration dictionary containing driver-specific parameters
        """
        self.basic_data_set = basic_data_set.copy() if basic_data_set else {}
        self._data = None

    @abstractmethod
    def load_data(self, split: str = "train", seed: int = None) -> Dataset:
        """
        Produce a dataset split.

        Train and test splits come from separate generator calls with
        disjoint seeds; drivers must not shuffle one pool into two.

        Args:
            split: "train" or "test"
            seed: Override for the configured seed

        Returns:
            Dataset
        """
        pass

    @property
    def data(self) -> Dataset:
        """Returns the most recently loaded Dataset."""
        if self._data is None:
            raise ValueError("No data loaded. Call load_data() first.")
        return self._data

    def split_seed(self, split: str, seed: int = None) -> int:
        """Seed for a split; test uses an offset so the two never coincide."""
        base = self.basic_data_set.get("seed", 0) if seed is None else seed
        return int(base) if split == "train" else int(base) + 1_000_003

    def __len__(self) -> int:
        return len(self._data) if self._data is not None else 0
