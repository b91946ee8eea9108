"""
Core modules of the pruning laboratory.

- numkernel: Layers, weight store, forward and backward passes
- dataset: Datasets and augmentation
- driver: Dataset providers
- bundle: Trained model with masks and provenance
- trainer: Sup / SCL training and fine-tuning
- pruner: Magnitude masks, sparsity schedule, strategy interface
- metrics: PIE, Q-Score, PD-Score and accuracy statistics
- analytics: Cohort tables and figures
"""

from .driver import DatasetDriver
from .dataset import Dataset, AugmentationPolicy
from .bundle import ModelBundle, Provenance, build_bundle
from .trainer import TrainConfig, Trainer, train_sup, train_scl, finetune
from .pruner import PruningStrategy, SparsitySchedule, MaskSet, magnitude_mask, sparsity_at
from .analytics import PruningAnalytics

__all__ = [
    'DatasetDriver',
    'Dataset',
    'AugmentationPolicy',
    'ModelBundle',
    'Provenance',
    'build_bundle',
    'TrainConfig',
    'Trainer',
    'train_sup',
    'train_scl',
    'finetune',
    'PruningStrategy',
    'SparsitySchedule',
    'MaskSet',
    'magnitude_mask',
    'sparsity_at',
    'PruningAnalytics',
]
