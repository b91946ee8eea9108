"""
Pruning strategies.

Strategies decide when and how far to prune:
- GMPStrategy: Cubic-schedule gradual pruning during training
- DelayedGMPStrategy: GMP whose ramp starts later (ΔGMP)
- OneShotStrategy: Global magnitude pruning after training
"""

from .gmp import GMPStrategy, gmp_hook
from .delayed_gmp import DelayedGMPStrategy, delayed_gmp_hook
from .one_shot import OneShotStrategy, one_shot_prune

PRUNING_MODES = ("GMP", "DeltaGMP", "OneShot")

__all__ = [
    'GMPStrategy', 'DelayedGMPStrategy', 'OneShotStrategy', 'PRUNING_MODES',
    'gmp_hook', 'delayed_gmp_hook', 'one_shot_prune',
]
