"""
Supervised (Sup) and supervised-contrastive (SCL) training.

Sup trains encoder and classifier head end-to-end with cross-entropy. SCL
first trains encoder + projection head with the supervised contrastive loss
on augmented multi-view batches, discards the projection head, then trains
the classifier head on the frozen encoder.

A pruning hook may be attached to any run; the trainer calls
hook.begin(bundle, total_steps) once and hook(step, bundle) before every
optimizer step.
"""

import logging
import math

import numpy as np
import pandas as pd

from prune_lab.core.bundle import ModelBundle, build_bundle
from prune_lab.core.dataset import Dataset, AugmentationPolicy, augment_batch
from prune_lab.core.numkernel import forward, backward
from prune_lab.core.errors import (
    ConfigError, DegenerateBatchError, NumericError, ParameterError, PreconditionError, ShapeError,
    TrainingError,
    DegenerateInputError,
)

logger = logging.getLogger(__name__)

METHODS = ("Sup", "SCL")

# Desk-scale profiles; the full-scale values are kept for reference runs.
DESK_SUP = {
    "method": "Sup", "epochs": 30, "batch_size": 32, "lr": 0.1, "momentum": 0.9,
    "weight_decay": 5e-4, "cosine_annealing": False, "representation_dim": 16,
}
DESK_SCL = {
    "method": "SCL", "epochs": 60, "batch_size": 64, "lr": 0.05, "momentum": 0.9,
    "weight_decay": 5e-4, "temperature": 0.5, "cosine_annealing": True, "representation_dim": 16,
    "head_epochs": 30, "head_lr": 0.1,
}
FULL_SUP = {
    "method": "Sup", "epochs": 205, "batch_size": 128, "lr": 1.0, "momentum": 0.9,
    "weight_decay": 5e-4, "cosine_annealing": False, "representation_dim": 128,
}
FULL_SCL = {
    "method": "SCL", "epochs": 500, "batch_size": 1024, "lr": 0.05, "momentum": 0.9,
    "weight_decay": 5e-4, "temperature": 0.5, "cosine_annealing": True, "representation_dim": 128,
}

MAX_BATCH_REDRAWS = 100


class TrainConfig:
    """Hyper-parameters of one training run."""

    def __init__(self, basic_data_set: dict = None):
        """
        Initialize configuration, filling gaps from the desk profile of the method.

        Args:
            basic_data_set: Configuration dict; keys as in DESK_SUP / DESK_SCL plus
                seed, hidden_dims, head_epochs, head_lr, stage2_augment,
                finetune_epochs, finetune_lr, finetune_scope
        """
        self.basic_data_set = dict(basic_data_set or {})
        method = self.basic_data_set.get("method", "Sup")
        if method not in METHODS:
            raise ConfigError(f"Unknown training method '{method}', choose from {METHODS}")

        defaults = dict(DESK_SUP if method == "Sup" else DESK_SCL)
        defaults.update({
            "temperature": defaults.get("temperature", 0.5),
            "seed": 0,
            "hidden_dims": (32, 32),
            "head_epochs": defaults.get("head_epochs", 0),
            "head_lr": defaults.get("head_lr", 0.1),
            "stage2_augment": False,
            "finetune_epochs": 10,
            "finetune_lr": 0.05,
            "finetune_scope": "all",
        })
        for k, v in defaults.items():
            self.basic_data_set.setdefault(k, v)
            setattr(self, k, self.basic_data_set[k])
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        self.validate()

    def validate(self):
        if self.epochs < 0 or self.head_epochs < 0 or self.finetune_epochs < 0:
            raise ConfigError("epoch counts must be nonnegative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.lr <= 0 or self.head_lr <= 0 or self.finetune_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if not (0 <= self.momentum < 1):
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be nonnegative")
        if self.method == "SCL" and self.temperature <= 0:
            raise ConfigError("SCL requires a positive temperature")
        if self.representation_dim < 1:
            raise ConfigError("representation_dim must be positive")
        if self.finetune_scope not in ("all", "head"):
            raise ConfigError("finetune_scope must be 'all' or 'head'")

    def with_overrides(self, **kwargs) -> "TrainConfig":
        d = dict(self.basic_data_set)
        d.update(kwargs)
        return TrainConfig(d)


def cross_entropy_loss(logits, labels) -> tuple:
    """
    Mean cross-entropy of a batch.

    Args:
        logits: Array (batch, C)
        labels: Class index per row

    Returns:
        Tuple (loss, dL/dlogits)
    """
    z = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or len(labels) != z.shape[0]:
        raise ShapeError(f"logits {z.shape} do not match {len(labels)} labels")
    if len(labels) and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise ShapeError("label outside the logit range")
    n = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sums = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(sums)
    rows = np.arange(n)
    loss = -np.mean(log_probs[rows, labels])
    grad = exp / sums
    grad[rows, labels] -= 1.0
    return float(loss), grad / n


def supcon_loss(z, labels, temperature: float) -> tuple:
    """
    Supervised contrastive loss (normalisation outside the log).

    L = sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/t) / sum_{a != i} exp(z_i.z_a/t) )
    with P(i) the other rows sharing i's label.

    Args:
        z: Unit-norm projections, array (n, p)
        labels: Class per row
        temperature: t > 0

    Returns:
        Tuple (loss, dL/dz)
    """
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels)
    if temperature <= 0:
        raise PreconditionError("temperature must be positive")
    if z.ndim != 2 or len(labels) != len(z):
        raise ShapeError(f"projections {z.shape} do not match {len(labels)} labels")
    norms = np.sqrt(np.sum(z ** 2, axis=1))
    if np.any(np.abs(norms - 1.0) > 1e-5):
        raise PreconditionError("supcon_loss expects L2-normalized projections")

    n = len(z)
    off_diag = ~np.eye(n, dtype=bool)
    positives = (labels[:, None] == labels[None, :]) & off_diag
    pos_count = positives.sum(axis=1)
    if np.any(pos_count == 0):
        raise DegenerateBatchError(f"{int(np.sum(pos_count == 0))} anchors have no positive")

    sim = z @ z.T / temperature
    row_max = np.max(np.where(off_diag, sim, -np.inf), axis=1, keepdims=True)
    exp = np.exp(sim - row_max) * off_diag
    denom = exp.sum(axis=1, keepdims=True)
    log_prob = sim - row_max - np.log(denom)
    loss = -np.sum(np.sum(np.where(positives, log_prob, 0.0), axis=1) / pos_count)

    coeff = exp / denom - positives / pos_count[:, None]
    grad = (coeff + coeff.T) @ z / temperature
    return float(loss), grad


def sgd_step(weights, mask, grad, lr_t: float, momentum: float, weight_decay: float, velocity) -> tuple:
    """
    One SGD-with-momentum update of a single tensor.

    v <- momentum*v + (grad + weight_decay*w); w <- w - lr_t*v; w <- w*mask

    Returns:
        Tuple (new weights, new velocity)
    """
    w = np.asarray(weights)
    dtype = w.dtype
    v = np.asarray(velocity, dtype=np.float64)
    v = momentum * v + (np.asarray(grad, dtype=np.float64) + weight_decay * w.astype(np.float64))
    new_w = (w.astype(np.float64) - lr_t * v).astype(dtype)
    if mask is not None:
        new_w = np.where(mask, new_w, 0).astype(dtype)
    return new_w, v


def cosine_lr(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Cosine-annealed learning rate for an epoch in [0, total_epochs)."""
    if not (0 <= epoch < total_epochs):
        raise ParameterError(f"epoch {epoch} outside [0, {total_epochs})")
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


class Trainer:
    """Runs optimizer loops over a bundle it owns exclusively."""

    def __init__(self, bundle: ModelBundle, config: TrainConfig, hook=None):
        """
        Args:
            bundle: Bundle to train in place
            config: TrainConfig
            hook: Optional pruning hook (see module docstring)
        """
        self.bundle = bundle
        self.config = config
        self.hook = hook
        self.velocity = {}
        self.step_log = []
        self.global_step = 0

    def _update(self, names: list, grads: dict, lr_t: float):
        store = self.bundle.store
        for name in names:
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros(store[name].shape)
            new_w, new_v = sgd_step(store[name], store.mask(name), grads[name], lr_t,
                                    self.config.momentum, self.config.weight_decay, v)
            store[name] = new_w
            self.velocity[name] = new_v

    def _log(self, epoch: int, lr_t: float, loss: float):
        self.step_log.append({
            "step": self.global_step,
            "epoch": epoch,
            "lr": lr_t,
            "loss": loss,
            "current_sparsity": self.bundle.sparsity(),
        })

    def _lr(self, base_lr: float, epoch: int, epochs: int) -> float:
        if self.config.cosine_annealing:
            return cosine_lr(base_lr, epoch, epochs)
        return base_lr

    def _check_loss(self, loss: float):
        if not np.isfinite(loss):
            raise TrainingError("loss diverged", step=self.global_step)

    def _batches(self, rng: np.random.Generator, n: int) -> list:
        order = rng.permutation(n)
        bs = self.config.batch_size
        return [order[i:i + bs] for i in range(0, n, bs)]

    def run_supervised(self, dataset: Dataset, epochs: int, lr: float, names: list,
                       use_hook: bool = True, seed_offset: int = 0) -> ModelBundle:
        """
        Cross-entropy SGD over the given trainable tensors.

        Args:
            dataset: Training data
            epochs: Number of epochs
            lr: Base learning rate
            names: Tensor names to update; others stay fixed
            use_hook: Invoke the pruning hook on every step
            seed_offset: Distinguishes the shuffling stream of separate phases
        """
        bundle = self.bundle
        rng = np.random.default_rng([self.config.seed, 1 + seed_offset])
        steps_per_epoch = math.ceil(len(dataset) / self.config.batch_size)
        if use_hook and self.hook is not None and hasattr(self.hook, "begin"):
            self.hook.begin(bundle, self.global_step + epochs * steps_per_epoch)

        for epoch in range(epochs):
            lr_t = self._lr(lr, epoch, epochs)
            for idx in self._batches(rng, len(dataset)):
                if use_hook and self.hook is not None:
                    self.hook(self.global_step, bundle)
                x, y = dataset.features[idx], dataset.labels[idx]
                try:
                    enc = forward(bundle.encoder, bundle.store, x)
                    head = forward(bundle.classifier, bundle.store, enc[-1])
                    loss, g_logits = cross_entropy_loss(head[-1], y)
                    self._check_loss(loss)
                    grads, g_h = backward(bundle.classifier, bundle.store, enc[-1], head, g_logits)
                    if any(n.startswith(f"{bundle.encoder.name}.") for n in names):
                        enc_grads, _ = backward(bundle.encoder, bundle.store, x, enc, g_h)
                        grads.update(enc_grads)
                except NumericError as e:
                    raise TrainingError(str(e), step=self.global_step) from e
                self._update(names, grads, lr_t)
                self._log(epoch, lr_t, loss)
                self.global_step += 1
        return bundle

    def run_contrastive(self, dataset: Dataset, policy: AugmentationPolicy) -> ModelBundle:
        """Stage 1 of SCL: encoder + projection head on augmented views."""
        bundle = self.bundle
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, 2])
        steps_per_epoch = math.ceil(len(dataset) / cfg.batch_size)
        if self.hook is not None and hasattr(self.hook, "begin"):
            self.hook.begin(bundle, self.global_step + cfg.epochs * steps_per_epoch)
        names = bundle.encoder.trainable_names() + bundle.projection.trainable_names()

        for epoch in range(cfg.epochs):
            lr_t = self._lr(cfg.lr, epoch, cfg.epochs)
            for b, idx in enumerate(self._batches(rng, len(dataset))):
                if self.hook is not None:
                    self.hook(self.global_step, bundle)
                view_seed = (cfg.seed * 1_000_003 + epoch) * 10_007 + b
                loss, grads = self._contrastive_step(dataset, idx, policy, view_seed, rng)
                self._update(names, grads, lr_t)
                self._log(epoch, lr_t, loss)
                self.global_step += 1
        return bundle

    def _contrastive_step(self, dataset, idx, policy, view_seed, rng) -> tuple:
        bundle = self.bundle
        for attempt in range(MAX_BATCH_REDRAWS + 1):
            views = augment_batch(dataset.features, idx, policy, view_seed + attempt)
            labels = np.tile(dataset.labels[idx], policy.views_per_sample)
            try:
                enc = forward(bundle.encoder, bundle.store, views)
                proj = forward(bundle.projection, bundle.store, enc[-1])
                loss, g_z = supcon_loss(proj[-1], labels, self.config.temperature)
            except (DegenerateBatchError, DegenerateInputError):
                logger.debug(f"step {self.global_step}: degenerate batch, redrawing")
                idx = rng.choice(len(dataset), size=len(idx), replace=False)
                continue
            except NumericError as e:
                raise TrainingError(str(e), step=self.global_step) from e
            n = len(labels)
            loss /= n
            self._check_loss(loss)
            grads, g_h = backward(bundle.projection, bundle.store, enc[-1], proj, g_z / n)
            enc_grads, _ = backward(bundle.encoder, bundle.store, views, enc, g_h)
            grads.update(enc_grads)
            return loss, grads
        raise TrainingError(f"no valid contrastive batch after {MAX_BATCH_REDRAWS} re-draws",
                            step=self.global_step)


def write_step_log(step_log: list, path: str):
    df = pd.DataFrame(step_log, columns=["step", "epoch", "lr", "loss", "current_sparsity"])
    with open(path, "w", encoding="utf-8") as f:
        if len(df):
            f.write(df.to_json(orient="records", lines=True, double_precision=15))
            f.write("\n")


def read_step_log(path: str) -> pd.DataFrame:
    with open(path, "r", encoding="utf-8") as f:
        if not f.read().strip():
            return pd.DataFrame(columns=["step", "epoch", "lr", "loss", "current_sparsity"])
    return pd.read_json(path, orient="records", lines=True)


def _initial_bundle(dataset: Dataset, config: TrainConfig, with_projection: bool) -> ModelBundle:
    return build_bundle(dataset.dim, dataset.class_count, config.representation_dim,
                        config.hidden_dims, with_projection=with_projection,
                        seed=config.seed, method=config.method)


def train_sup(dataset: Dataset, config: TrainConfig, hook=None) -> tuple:
    """
    Train encoder + classifier end-to-end with cross-entropy.

    Returns:
        Tuple (ModelBundle, step log as list of dicts)
    """
    if config.method != "Sup":
        raise ConfigError("train_sup requires method Sup")
    bundle = _initial_bundle(dataset, config, with_projection=False)
    trainer = Trainer(bundle, config, hook)
    names = bundle.encoder.trainable_names() + bundle.classifier.trainable_names()
    trainer.run_supervised(dataset, config.epochs, config.lr, names)
    logger.info(f"Sup seed {config.seed}: train accuracy {bundle.accuracy(dataset.features, dataset.labels):.3f}")
    return bundle, trainer.step_log


def train_scl(dataset: Dataset, config: TrainConfig, policy: AugmentationPolicy, hook=None) -> tuple:
    """
    Two-stage supervised contrastive training.

    Stage 1 trains encoder + projection head with supcon_loss (the pruning hook
    runs here). Stage 2 freezes the encoder and trains the classifier head with
    cross-entropy on clean data (augmented when config.stage2_augment is set).

    Returns:
        Tuple (ModelBundle without projection head, step log)
    """
    if config.method != "SCL":
        raise ConfigError("train_scl requires method SCL")
    if policy is None or policy.views_per_sample < 2:
        raise ConfigError("SCL requires an augmentation policy with at least two views")

    bundle = _initial_bundle(dataset, config, with_projection=True)
    trainer = Trainer(bundle, config, hook)
    trainer.run_contrastive(dataset, policy)
    bundle.drop_projection()

    head_data = dataset
    if config.stage2_augment:
        views = augment_batch(dataset.features, range(len(dataset)), policy, config.seed + 17)
        head_data = Dataset(views, np.tile(dataset.labels, policy.views_per_sample),
                            dataset.class_count, split=dataset.split)
    trainer.run_supervised(head_data, config.head_epochs, config.head_lr,
                           bundle.classifier.trainable_names(), use_hook=False, seed_offset=2)
    logger.info(f"SCL seed {config.seed}: train accuracy {bundle.accuracy(dataset.features, dataset.labels):.3f}")
    return bundle, trainer.step_log


def finetune(bundle: ModelBundle, dataset: Dataset, epochs: int, lr: float,
             config: TrainConfig = None, scope: str = None, step_log: list = None) -> ModelBundle:
    """
    Supervised fine-tuning with frozen masks.

    Args:
        bundle: Bundle to fine-tune (a copy is returned)
        dataset: Training data
        epochs: Fine-tuning epochs
        lr: Learning rate
        config: Optimizer settings (momentum, weight decay, batch size, seed)
        scope: "all" updates every unmasked weight, "head" only the classifier
        step_log: Optional list extended with the fine-tuning step records

    Returns:
        Fine-tuned copy of the bundle; sparsity is unchanged
    """
    config = config or TrainConfig({"method": bundle.provenance.method, "seed": bundle.provenance.seed})
    config = config.with_overrides(cosine_annealing=False)
    scope = scope or config.finetune_scope
    tuned = bundle.copy()
    trainer = Trainer(tuned, config)
    names = tuned.classifier.trainable_names()
    if scope == "all":
        names = tuned.encoder.trainable_names() + names
    trainer.run_supervised(dataset, epochs, lr, names, use_hook=False, seed_offset=3)
    if step_log is not None:
        step_log.extend(trainer.step_log)
    return tuned
