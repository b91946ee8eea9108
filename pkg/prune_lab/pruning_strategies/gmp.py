"""
Gradual magnitude pruning (GMP).

Masks are recomputed every `frequency` steps from begin_step on, following
the cubic sparsity ramp; updates continue past end_step at the final sparsity.
"""

from prune_lab.core.pruner import PruningStrategy, SparsitySchedule, sparsity_at


class GMPStrategy(PruningStrategy):
    """Cubic-schedule gradual pruning during training."""

    label = "GMP"

    def __init__(self, basic_data_set: dict):
        """
        Initialize strategy with schedule parameters.

        Args:
            basic_data_set: Configuration dict with:
                - final_sparsity: Target sparsity s_f
                - initial_sparsity: Ramp start s_i (default: 0.0)
                - begin_step, end_step: Ramp endpoints t_0 < t_e
                - frequency: Steps between mask updates (default: 1)
                - scope: "per_layer" (default) or "global"
        """
        super().__init__(basic_data_set)
        self.schedule = SparsitySchedule(
            final_sparsity=float(self.basic_data_set["final_sparsity"]),
            begin_step=int(self.basic_data_set["begin_step"]),
            end_step=int(self.basic_data_set["end_step"]),
            frequency=int(self.basic_data_set.get("frequency", 1)),
            initial_sparsity=float(self.basic_data_set.get("initial_sparsity", 0.0)),
        )

    def should_prune(self, step: int) -> bool:
        t0 = self.schedule.begin_step
        return step >= t0 and (step - t0) % self.schedule.frequency == 0

    def target_sparsity(self, step: int) -> float:
        return sparsity_at(self.schedule, step)


def schedule_dict(schedule: SparsitySchedule, scope: str) -> dict:
    return {
        "final_sparsity": schedule.final_sparsity,
        "initial_sparsity": schedule.initial_sparsity,
        "begin_step": schedule.begin_step,
        "end_step": schedule.end_step,
        "frequency": schedule.frequency,
        "scope": scope,
    }


def gmp_hook(schedule: SparsitySchedule, scope: str = "per_layer") -> GMPStrategy:
    """Step callback applying GMP on the given schedule."""
    return GMPStrategy(schedule_dict(schedule, scope))
