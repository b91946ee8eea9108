"""
Tests for magnitude pruning, the sparsity schedule and pruning strategies.
"""

import pytest
import numpy as np
from collections import OrderedDict

from prune_lab.core.pruner import (
    SparsitySchedule, sparsity_at, magnitude_mask, prune_bundle, PruningStrategy,
)
from prune_lab.core.bundle import build_bundle
from prune_lab.core.trainer import TrainConfig, train_sup, train_scl
from prune_lab.core.dataset import AugmentationPolicy
from prune_lab.drivers import make_blobs
from prune_lab.pruning_strategies import (
    GMPStrategy, DelayedGMPStrategy, OneShotStrategy, gmp_hook, delayed_gmp_hook, one_shot_prune,
)
from prune_lab.core.errors import DegenerateLayerError, ParameterError


def random_weights(seed, shapes=((4, 6), (6, 3), (3, 2))):
    rng = np.random.default_rng(seed)
    weights = OrderedDict((f"t{i}", rng.normal(size=s)) for i, s in enumerate(shapes))
    # one large entry per tensor keeps every tensor alive under global ranking
    for w in weights.values():
        w.flat[0] = 10.0 + rng.uniform()
    return weights


class RecordingStrategy(PruningStrategy):
    """Prunes every step to a fixed target."""

    label = "Fixed"

    def should_prune(self, step):
        return True

    def target_sparsity(self, step):
        return self.basic_data_set["target"]


class TestSchedule:
    """Test suite for the cubic sparsity ramp."""

    def test_endpoints_exact(self):
        schedule = SparsitySchedule(0.9, 0, 1000, initial_sparsity=0.1)
        assert sparsity_at(schedule, 0) == 0.1
        assert sparsity_at(schedule, 1000) == 0.9
        assert sparsity_at(schedule, 5000) == 0.9

    def test_midpoint(self):
        schedule = SparsitySchedule(0.9, 0, 1000)
        assert abs(sparsity_at(schedule, 500) - 0.7875) < 1e-12

    def test_monotone(self):
        schedule = SparsitySchedule(0.8, 10, 200, frequency=7)
        values = [sparsity_at(schedule, t) for t in range(300)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("kwargs", [
        {"final_sparsity": 0.5, "begin_step": 10, "end_step": 10},
        {"final_sparsity": 0.5, "begin_step": 0, "end_step": 10, "frequency": 0},
        {"final_sparsity": 0.3, "begin_step": 0, "end_step": 10, "initial_sparsity": 0.4},
        {"final_sparsity": 1.0, "begin_step": 0, "end_step": 10},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            SparsitySchedule(**kwargs)


class TestMagnitudeMask:
    """Test suite for magnitude_mask."""

    def test_global_picks_smallest(self):
        weights = OrderedDict([("a", np.array([0.1, -5.0])), ("b", np.array([3.0, -0.2]))])
        masks = magnitude_mask(weights, 0.5, "global").masks
        assert masks["a"].tolist() == [False, True]
        assert masks["b"].tolist() == [True, False]

    def test_ties_by_registration_order(self):
        weights = OrderedDict([("a", np.array([1.0, 1.0])), ("b", np.array([1.0, 1.0]))])
        masks = magnitude_mask(weights, 0.5, "global").masks
        assert masks["a"].tolist() == [False, False]
        assert masks["b"].tolist() == [True, True]

    @pytest.mark.parametrize("scope", ["global", "per_layer"])
    @pytest.mark.parametrize("target", [0.0, 0.3, 0.5, 0.77, 0.9])
    def test_exactness(self, scope, target):
        weights = random_weights(0)
        result = magnitude_mask(weights, target, scope)
        assert abs(result.achieved_sparsity - target) <= 1.0 / result.total

    def test_per_layer_spreads_evenly(self):
        weights = random_weights(1)
        result = magnitude_mask(weights, 0.5, "per_layer")
        for name, mask in result.masks.items():
            assert abs((mask.size - mask.sum()) - 0.5 * mask.size) <= 1

    @pytest.mark.parametrize("seed", range(100))
    def test_scale_invariant_and_deterministic(self, seed):
        weights = random_weights(seed)
        scaled = OrderedDict((n, 3.5 * w) for n, w in weights.items())
        a = magnitude_mask(weights, 0.6, "global")
        assert a.equals(magnitude_mask(weights, 0.6, "global"))
        assert a.equals(magnitude_mask(scaled, 0.6, "global"))

    def test_previous_masks_stay(self):
        weights = random_weights(2)
        first = magnitude_mask(weights, 0.3, "per_layer")
        effective = OrderedDict((n, np.where(first.masks[n], w, 0)) for n, w in weights.items())
        second = magnitude_mask(effective, 0.6, "per_layer", previous=first.masks)
        for name in weights:
            assert not np.any(second.masks[name] & ~first.masks[name])
        assert abs(second.achieved_sparsity - 0.6) <= 1.0 / second.total

    def test_degenerate_layer(self):
        weights = OrderedDict([("big", np.full(10, 5.0)), ("tiny", np.array([0.01]))])
        with pytest.raises(DegenerateLayerError):
            magnitude_mask(weights, 0.1, "global")

    def test_invalid_target(self):
        with pytest.raises(ParameterError):
            magnitude_mask(random_weights(0), 1.0)
        with pytest.raises(ParameterError):
            magnitude_mask(random_weights(0), 0.5, scope="row")


class TestStrategies:
    """Test suite for the pruning hooks."""

    def test_projection_head_never_pruned(self):
        bundle = build_bundle(2, 3, with_projection=True, seed=0)
        prune_bundle(bundle, 0.5, "global")
        assert all(bundle.store.mask(n) is None for n in bundle.projection.trainable_names())
        assert abs(bundle.sparsity() - 0.5) <= 1.0 / bundle.store.total_prunable(bundle.prunable_names())

    def test_gmp_fires_on_frequency(self):
        hook = gmp_hook(SparsitySchedule(0.9, 10, 200, frequency=10))
        hook.begin(None, 300)
        fired = [t for t in range(300) if hook.should_prune(t)]
        assert fired[0] == 10
        assert all((t - 10) % 10 == 0 for t in fired)
        assert hook.target_sparsity(300) == 0.9

    def test_gmp_never_fires_when_begin_beyond_run(self):
        data = make_blobs(2, 20, 2, 6.0, seed=0)
        hook = gmp_hook(SparsitySchedule(0.9, 10_000, 20_000))
        bundle, _ = train_sup(data, TrainConfig({"method": "Sup", "epochs": 2}), hook)
        assert bundle.sparsity() == 0.0
        assert hook.trace == []

    def test_gmp_training_reaches_final_sparsity(self):
        data = make_blobs(2, 40, 2, 6.0, seed=1)
        config = TrainConfig({"method": "Sup", "epochs": 10, "batch_size": 8})
        hook = gmp_hook(SparsitySchedule(0.9, 10, 60, frequency=5))
        bundle, log = train_sup(data, config, hook)
        total = bundle.store.total_prunable(bundle.prunable_names())
        assert abs(bundle.sparsity() - 0.9) <= 1.0 / total
        achieved = [r["achieved"] for r in hook.trace]
        assert all(b >= a for a, b in zip(achieved, achieved[1:]))
        for name in bundle.prunable_names():
            assert np.all(bundle.store[name][~bundle.store.mask(name)] == 0.0)
        sparsities = [r["current_sparsity"] for r in log]
        assert all(b >= a for a, b in zip(sparsities, sparsities[1:]))

    def test_delayed_gmp_shift(self):
        hook = delayed_gmp_hook(SparsitySchedule(0.5, 3, 40, frequency=4), delay_epochs=50,
                                steps_per_epoch=10)
        assert hook.schedule.begin_step == 503
        assert hook.schedule.end_step == 540
        hook.begin(None, 1000)
        assert [t for t in range(510) if hook.should_prune(t)] == [503, 507]

    def test_delayed_gmp_clamps_last_step(self, caplog):
        hook = DelayedGMPStrategy({"final_sparsity": 0.8, "begin_step": 0, "end_step": 50,
                                   "frequency": 10, "delay_epochs": 2, "steps_per_epoch": 10})
        hook.begin(None, 40)
        assert "exceeds the run" in caplog.text
        assert hook.should_prune(39)
        assert hook.target_sparsity(39) == 0.8

    def test_delayed_gmp_in_scl_stage_one(self):
        data = make_blobs(2, 16, 2, 6.0, seed=2)
        config = TrainConfig({"method": "SCL", "epochs": 6, "batch_size": 16, "head_epochs": 2})
        hook = delayed_gmp_hook(SparsitySchedule(0.5, 0, 2, frequency=1), delay_epochs=2, steps_per_epoch=2)
        bundle, log = train_scl(data, config, AugmentationPolicy(), hook)
        assert hook.trace[0]["step"] == 4
        total = bundle.store.total_prunable(bundle.prunable_names())
        assert abs(bundle.sparsity() - 0.5) <= 1.0 / total

    def test_one_shot_prune_copy(self):
        bundle = build_bundle(2, 3, seed=1)
        pruned = one_shot_prune(bundle, 0.75)
        assert bundle.sparsity() == 0.0
        assert pruned.provenance.pruning == "OneShot"
        assert pruned.provenance.sparsity == 0.75
        zeros = sum(int(np.sum(pruned.store[n] == 0.0)) for n in pruned.prunable_names())
        assert zeros >= int(0.75 * pruned.store.total_prunable(pruned.prunable_names()))

    def test_one_shot_strategy(self):
        strategy = OneShotStrategy({"target_sparsity": 0.5})
        assert strategy.scope == "global"
        assert not any(strategy.should_prune(t) for t in range(100))
        assert strategy.apply(build_bundle(2, 2, seed=0)).provenance.sparsity == 0.5

    def test_custom_strategy_trace(self):
        bundle = build_bundle(2, 2, seed=3)
        strategy = RecordingStrategy({"target": 0.4, "scope": "global"})
        strategy(0, bundle)
        assert strategy.trace[0]["target"] == 0.4
        assert isinstance(GMPStrategy({"final_sparsity": 0.5, "begin_step": 0, "end_step": 5}), PruningStrategy)
