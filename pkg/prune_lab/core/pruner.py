"""
Magnitude pruning primitives and the pruning strategy interface.

Masks are recomputed from the current (effective) weights. Masked weights are
exactly zero and therefore rank smallest at the next update, so repeated
updates with a nondecreasing target never un-prune a weight.
"""

from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from prune_lab.core.errors import DegenerateLayerError, ParameterError

logger = logging.getLogger(__name__)

SCOPES = ("global", "per_layer")
_EPS = 1e-9


@dataclass
class SparsitySchedule:
    """Cubic-ramp gradual pruning plan."""

    final_sparsity: float
    begin_step: int
    end_step: int
    frequency: int = 1
    initial_sparsity: float = 0.0

    def __post_init__(self):
        if not (self.begin_step < self.end_step):
            raise ParameterError(f"begin_step {self.begin_step} must be < end_step {self.end_step}")
        if self.frequency < 1:
            raise ParameterError("frequency must be >= 1")
        if not (0.0 <= self.initial_sparsity <= self.final_sparsity < 1.0):
            raise ParameterError("need 0 <= initial_sparsity <= final_sparsity < 1")

    def shifted(self, offset: int) -> "SparsitySchedule":
        """Same ramp moved by offset steps."""
        return SparsitySchedule(self.final_sparsity, self.begin_step + offset,
                                self.end_step + offset, self.frequency, self.initial_sparsity)


@dataclass
class MaskSet:
    """One boolean mask per prunable tensor (True = kept)."""

    masks: OrderedDict = field(default_factory=OrderedDict)

    @property
    def total(self) -> int:
        return int(sum(m.size for m in self.masks.values()))

    @property
    def achieved_sparsity(self) -> float:
        total = self.total
        if total == 0:
            return 0.0
        return sum(int(m.size - np.count_nonzero(m)) for m in self.masks.values()) / total

    def equals(self, other: "MaskSet") -> bool:
        return (list(self.masks) == list(other.masks)
                and all(np.array_equal(self.masks[n], other.masks[n]) for n in self.masks))


def sparsity_at(schedule: SparsitySchedule, step: int) -> float:
    """
    Target sparsity of the cubic ramp at a step.

    s_t = s_f + (s_i - s_f) * (1 - (t - t_0) / (t_e - t_0))^3, equal to s_i
    before t_0 and to s_f from t_e on.
    """
    if step < schedule.begin_step:
        return schedule.initial_sparsity
    if step >= schedule.end_step:
        return schedule.final_sparsity
    progress = (step - schedule.begin_step) / (schedule.end_step - schedule.begin_step)
    return schedule.final_sparsity + (schedule.initial_sparsity - schedule.final_sparsity) * (1.0 - progress) ** 3


def _prune_count(target: float, n: int) -> int:
    return int(math.floor(target * n + _EPS))


def _per_layer_counts(target: float, sizes: list, already: list) -> list:
    """
    Split floor(target * total) over tensors: floors first (never below the
    already-masked count), remainder to the largest fractional parts.
    """
    k_total = _prune_count(target, sum(sizes))
    raw = [target * n for n in sizes]
    counts = [max(_prune_count(target, n), a) for n, a in zip(sizes, already)]
    deficit = k_total - sum(counts)
    order = sorted(range(len(sizes)), key=lambda i: (-(raw[i] - counts[i]), i))
    order = [i for i in order if counts[i] < sizes[i]]
    for i in order[:max(0, deficit)]:
        counts[i] += 1
    return counts


def magnitude_mask(weights, target_sparsity: float, scope: str = "global", previous=None) -> MaskSet:
    """
    Mask the smallest-magnitude weights.

    Ties are broken by (tensor registration order, flat element index).

    Args:
        weights: Ordered mapping name -> weight array (effective, i.e. masked entries 0)
        target_sparsity: Fraction in [0, 1)
        scope: "global" ranks all tensors jointly, "per_layer" ranks within each tensor
        previous: Optional mapping name -> existing mask; masked entries stay masked

    Returns:
        MaskSet

    Raises:
        DegenerateLayerError: when a tensor would lose all its weights
    """
    if not (0.0 <= target_sparsity < 1.0):
        raise ParameterError(f"target sparsity must lie in [0, 1), got {target_sparsity}")
    if scope not in SCOPES:
        raise ParameterError(f"Unknown scope '{scope}', choose from {SCOPES}")

    names = list(weights)
    arrays = [np.abs(np.asarray(weights[n], dtype=np.float64)).ravel() for n in names]
    sizes = [a.size for a in arrays]
    keep = [np.ones(s, dtype=bool) for s in sizes]

    if scope == "global":
        flat = np.concatenate(arrays) if arrays else np.zeros(0)
        k = _prune_count(target_sparsity, flat.size)
        pruned = np.argsort(flat, kind="stable")[:k]
        flat_keep = np.ones(flat.size, dtype=bool)
        flat_keep[pruned] = False
        offsets = np.cumsum([0] + sizes)
        keep = [flat_keep[offsets[i]:offsets[i + 1]] for i in range(len(names))]
    else:
        already = [0] * len(names)
        if previous is not None:
            already = [0 if previous.get(n) is None else int(np.size(previous[n]) - np.count_nonzero(previous[n]))
                       for n in names]
        for i, k in enumerate(_per_layer_counts(target_sparsity, sizes, already)):
            keep[i][np.argsort(arrays[i], kind="stable")[:k]] = False

    result = MaskSet()
    for name, kept in zip(names, keep):
        mask = kept.reshape(np.shape(weights[name]))
        if previous is not None and previous.get(name) is not None:
            mask = mask & np.asarray(previous[name], dtype=bool)
        if mask.size and not mask.any():
            raise DegenerateLayerError(f"Pruning to {target_sparsity:.3f} leaves '{name}' without weights")
        result.masks[name] = mask
    return result


def bundle_weights(bundle) -> OrderedDict:
    """Effective prunable weights of a bundle in registration order."""
    return OrderedDict((n, bundle.store.effective(n)) for n in bundle.prunable_names())


def prune_bundle(bundle, target_sparsity: float, scope: str) -> MaskSet:
    """Recompute and install masks on a bundle in place."""
    names = bundle.prunable_names()
    previous = {n: bundle.store.mask(n) for n in names}
    mask_set = magnitude_mask(bundle_weights(bundle), target_sparsity, scope, previous)
    for name, mask in mask_set.masks.items():
        bundle.store.set_mask(name, mask)
    return mask_set


class PruningStrategy(ABC):
    """Abstract pruning schedule attached to a training loop as a step hook."""

    label = "None"

    def __init__(self, basic_data_set: dict):
        """
        Initialize strategy with configuration.

        Args:
            basic_data_set: Configuration dictionary
        """
        self.basic_data_set = dict(basic_data_set or {})
        self.scope = self.basic_data_set.get("scope", "per_layer")
        if self.scope not in SCOPES:
            raise ParameterError(f"Unknown scope '{self.scope}', choose from {SCOPES}")
        self.total_steps = None
        self.trace = []

    def begin(self, bundle, total_steps: int):
        """Called once by the trainer before step 0."""
        self.total_steps = total_steps
        self.trace = []

    @abstractmethod
    def should_prune(self, step: int) -> bool:
        """
        Decide if the masks are recomputed at this step.

        Args:
            step: Global optimizer step

        Returns:
            True if masks are updated before this step
        """
        pass

    @abstractmethod
    def target_sparsity(self, step: int) -> float:
        """
        Sparsity the masks are recomputed to at this step.

        Args:
            step: Global optimizer step

        Returns:
            Fraction in [0, 1)
        """
        pass

    def __call__(self, step: int, bundle):
        if not self.should_prune(step):
            return None
        target = self.target_sparsity(step)
        mask_set = prune_bundle(bundle, target, self.scope)
        self.trace.append({"step": step, "target": target, "achieved": mask_set.achieved_sparsity})
        logger.debug(f"{self.label} step {step}: sparsity {mask_set.achieved_sparsity:.4f}")
        return mask_set
