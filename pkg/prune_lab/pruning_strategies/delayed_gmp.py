"""
Delayed gradual magnitude pruning (ΔGMP).

GMP whose ramp starts delay_epochs later; both endpoints move so the ramp
length is preserved. If the shifted ramp cannot finish inside the run, the
last step of the run prunes to the final sparsity.
"""

import logging

from prune_lab.pruning_strategies.gmp import GMPStrategy, schedule_dict

logger = logging.getLogger(__name__)


class DelayedGMPStrategy(GMPStrategy):
    """GMP with a start delay measured in epochs."""

    label = "DeltaGMP"

    def __init__(self, basic_data_set: dict):
        """
        Initialize strategy.

        Args:
            basic_data_set: GMP keys plus:
                - delay_epochs: Epochs to postpone the ramp (default: 0)
                - steps_per_epoch: Optimizer steps per epoch
        """
        super().__init__(basic_data_set)
        self.delay_epochs = int(self.basic_data_set.get("delay_epochs", 0))
        self.steps_per_epoch = int(self.basic_data_set.get("steps_per_epoch", 1))
        self.offset = self.delay_epochs * self.steps_per_epoch
        self.schedule = self.schedule.shifted(self.offset)

    def begin(self, bundle, total_steps: int):
        super().begin(bundle, total_steps)
        if self.schedule.end_step > total_steps - 1:
            logger.warning(
                f"ΔGMP end step {self.schedule.end_step} exceeds the run ({total_steps} steps); "
                f"the last step prunes to {self.schedule.final_sparsity}")

    def _clamp_step(self, step: int) -> bool:
        return (self.total_steps is not None and step == self.total_steps - 1
                and self.schedule.end_step > step)

    def should_prune(self, step: int) -> bool:
        return super().should_prune(step) or self._clamp_step(step)

    def target_sparsity(self, step: int) -> float:
        if self._clamp_step(step):
            return self.schedule.final_sparsity
        return super().target_sparsity(step)


def delayed_gmp_hook(schedule, delay_epochs: int, steps_per_epoch: int,
                     scope: str = "per_layer") -> DelayedGMPStrategy:
    """Step callback applying ΔGMP: the schedule shifted by delay_epochs * steps_per_epoch."""
    d = schedule_dict(schedule, scope)
    d.update({"delay_epochs": delay_epochs, "steps_per_epoch": steps_per_epoch})
    return DelayedGMPStrategy(d)
