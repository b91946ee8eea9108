"""
Datasets and augmented views.

A Dataset holds a feature matrix (one row per sample), integer labels and the
class count. Augmentation replaces image transforms with a per-sample
multiplicative scale plus additive Gaussian jitter, which keeps labels
meaningful for point-cloud data.
"""

from dataclasses import dataclass, field

import numpy as np

from prune_lab.core.errors import ParameterError


@dataclass
class Dataset:
    """Labelled samples; row i of features belongs to sample_ids[i]."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"
    sample_ids: np.ndarray = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.sample_ids is None:
            self.sample_ids = np.arange(len(self.labels), dtype=np.int64)
        else:
            self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)
        self.validate()

    def validate(self):
        if self.features.ndim != 2:
            raise ParameterError(f"Features must be a matrix, got shape {self.features.shape}")
        if len(self.features) != len(self.labels) or len(self.labels) != len(self.sample_ids):
            raise ParameterError("features, labels and sample_ids must have equal length")
        if self.split not in ("train", "test"):
            raise ParameterError(f"Unknown split '{self.split}'")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ParameterError(f"Labels must lie in [0, {self.class_count})")
        if self.split == "train":
            missing = set(range(self.class_count)) - set(np.unique(self.labels).tolist())
            if missing:
                raise ParameterError(f"Train split has empty classes: {sorted(missing)}")

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def equals(self, other: "Dataset", atol: float = 0.0) -> bool:
        if self.class_count != other.class_count or self.features.shape != other.features.shape:
            return False
        if not np.array_equal(self.labels, other.labels):
            return False
        if atol == 0.0:
            return bool(np.array_equal(self.features, other.features))
        return bool(np.allclose(self.features, other.features, rtol=0.0, atol=atol))


@dataclass
class AugmentationPolicy:
    """Noise/scale augmentation producing views_per_sample views of a sample."""

    noise_sigma: float = 0.1
    scale_range: tuple = field(default=(0.8, 1.2))
    views_per_sample: int = 2

    def __post_init__(self):
        self.scale_range = tuple(float(s) for s in self.scale_range)
        self.validate()

    def validate(self):
        a, b = self.scale_range
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma must be nonnegative")
        if not (0 < a <= b):
            raise ParameterError(f"scale_range must satisfy 0 < a <= b, got {self.scale_range}")
        if self.views_per_sample < 2:
            raise ParameterError("views_per_sample must be at least 2")


def augment(sample, policy: AugmentationPolicy, seed: int, index: int = 0) -> list:
    """
    Create augmented views of one sample.

    view_k = scale_k * sample + noise_k, with scale_k ~ U[a, b] and
    noise_k ~ N(0, noise_sigma^2) per component.

    Args:
        sample: Feature vector
        policy: AugmentationPolicy
        seed: Base seed
        index: Sample index; views are deterministic in (index, seed)

    Returns:
        List of policy.views_per_sample float32 vectors
    """
    sample = np.asarray(sample, dtype=np.float32)
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    a, b = policy.scale_range
    views = []
    for _ in range(policy.views_per_sample):
        scale = a if a == b else rng.uniform(a, b)
        view = sample.astype(np.float64) * scale
        if policy.noise_sigma > 0:
            view = view + rng.normal(0.0, policy.noise_sigma, size=sample.shape)
        views.append(view.astype(np.float32))
    return views


def augment_batch(features: np.ndarray, indices, policy: AugmentationPolicy, seed: int) -> np.ndarray:
    """
    Augment a batch of samples.

    Returns:
        Array (len(indices) * views, dim); rows are grouped view-major, i.e. all
        first views, then all second views, ...
    """
    per_sample = [augment(features[i], policy, seed, index=i) for i in indices]
    return np.stack([views[k] for k in range(policy.views_per_sample) for views in per_sample])
