"""
Global post-training one-shot pruning.

A single magnitude threshold over encoder and classifier weights; the
pruned bundle is then fine-tuned with frozen masks (training.finetune).
"""

import logging

from prune_lab.core.pruner import PruningStrategy, prune_bundle

logger = logging.getLogger(__name__)


def one_shot_prune(bundle, target_sparsity: float, scope: str = "global"):
    """
    Prune a trained bundle once.

    Args:
        bundle: Trained ModelBundle (left untouched)
        target_sparsity: Fraction in [0, 1)
        scope: "global" (default) or "per_layer"

    Returns:
        Pruned copy with provenance updated
    """
    pruned = bundle.copy()
    if target_sparsity > 0:
        mask_set = prune_bundle(pruned, target_sparsity, scope)
        logger.info(f"One-shot pruned to {mask_set.achieved_sparsity:.4f}")
    pruned.provenance.sparsity = float(target_sparsity)
    pruned.provenance.pruning = OneShotStrategy.label
    return pruned


class OneShotStrategy(PruningStrategy):
    """Post-training pruning; as a hook it never fires during training."""

    label = "OneShot"

    def __init__(self, basic_data_set: dict):
        """
        Args:
            basic_data_set: Configuration dict with target_sparsity and scope
                (default: "global")
        """
        basic_data_set = dict(basic_data_set or {})
        basic_data_set.setdefault("scope", "global")
        super().__init__(basic_data_set)
        self.sparsity = float(self.basic_data_set.get("target_sparsity", 0.0))

    def should_prune(self, step: int) -> bool:
        return False

    def target_sparsity(self, step: int) -> float:
        return self.sparsity

    def apply(self, bundle):
        return one_shot_prune(bundle, self.sparsity, self.scope)
