"""
Experiment configuration files.

INI format with the sections below; every key is optional and typed by
SCHEMA. Unknown sections or keys and unparsable values raise ConfigError.

    [experiment]  name, output_dir, ensemble_size, base_seed, sparsities,
                  methods, pruning, workers, plots
    [dataset]     kind plus the keys of the chosen driver
    [sup], [scl]  training hyper-parameters (preset = desk | full)
    [augment]     noise_sigma, scale_min, scale_max, views_per_sample
    [pruning]     begin_epoch, end_epoch, frequency, delay_epochs,
                  initial_sparsity, scope, oneshot_scope
    [probe]       k, q_probe, pd
"""

import configparser
from dataclasses import dataclass, field
import hashlib
import logging
import os

from prune_lab.core.dataset import AugmentationPolicy
from prune_lab.core.errors import ConfigError, PruneLabError
from prune_lab.core.trainer import METHODS, FULL_SUP, FULL_SCL, TrainConfig
from prune_lab.pruning_strategies import PRUNING_MODES

logger = logging.getLogger(__name__)

WORKERS_ENV = "PRUNELAB_WORKERS"


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(",", " ").split())


def _strings(text: str) -> list:
    return [t for t in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in configparser.ConfigParser.BOOLEAN_STATES:
        return configparser.ConfigParser.BOOLEAN_STATES[value]
    raise ValueError(f"not a boolean: '{text}'")


_TRAIN_KEYS = {
    "preset": str, "epochs": int, "batch_size": int, "lr": float, "momentum": float,
    "weight_decay": float, "temperature": float, "cosine_annealing": _bool,
    "representation_dim": int, "hidden_dims": _ints, "head_epochs": int, "head_lr": float,
    "stage2_augment": _bool, "finetune_epochs": int, "finetune_lr": float, "finetune_scope": str,
}

SCHEMA = {
    "experiment": {
        "name": str, "output_dir": str, "ensemble_size": int, "base_seed": int,
        "sparsities": _floats, "methods": _strings, "pruning": _strings, "workers": int,
        "plots": _bool,
    },
    "dataset": {
        "kind": str, "seed": int, "class_count": int, "per_class": int, "test_per_class": int,
        "dim": int, "separation": float, "noise_sigma": float, "ring_classes": int,
        "blob_classes": int, "train_path": str, "test_path": str,
    },
    "sup": _TRAIN_KEYS,
    "scl": _TRAIN_KEYS,
    "augment": {
        "noise_sigma": float, "scale_min": float, "scale_max": float, "views_per_sample": int,
    },
    "pruning": {
        "begin_epoch": int, "end_epoch": int, "frequency": int, "delay_epochs": int,
        "initial_sparsity": float, "scope": str, "oneshot_scope": str,
    },
    "probe": {"k": int, "q_probe": int, "pd": _bool},
}

PRUNING_DEFAULTS = {
    "begin_epoch": 2,
    "end_epoch": 15,
    "frequency": 5,
    "delay_epochs": 5,
    "initial_sparsity": 0.0,
    "scope": "per_layer",
    "oneshot_scope": "global",
}

PROBE_DEFAULTS = {"k": 5, "q_probe": -2, "pd": True}


@dataclass
class ExperimentConfig:
    """Parsed experiment file."""

    name: str = "desk"
    output_dir: str = "runs"
    ensemble_size: int = 5
    base_seed: int = 0
    sparsities: list = field(default_factory=lambda: [0.0, 0.5, 0.9])
    methods: list = field(default_factory=lambda: list(METHODS))
    pruning_modes: list = field(default_factory=lambda: list(PRUNING_MODES))
    workers: int = 1
    workers_override: int = None
    plots: bool = True
    dataset: dict = field(default_factory=lambda: {"kind": "mixture"})
    train: dict = field(default_factory=dict)
    augment: dict = field(default_factory=dict)
    pruning: dict = field(default_factory=lambda: dict(PRUNING_DEFAULTS))
    probe: dict = field(default_factory=lambda: dict(PROBE_DEFAULTS))
    text: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be >= 1")
        if 0.0 not in self.sparsities:
            raise ConfigError("sparsities must contain 0, the dense baseline")
        if any(not (0.0 <= s < 1.0) for s in self.sparsities):
            raise ConfigError("sparsities must lie in [0, 1)")
        if len(set(self.sparsities)) != len(self.sparsities):
            raise ConfigError("sparsities must be distinct")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ConfigError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        unknown = set(self.pruning_modes) - set(PRUNING_MODES)
        if unknown:
            raise ConfigError(f"pruning must be a subset of {PRUNING_MODES}, got {self.pruning_modes}")
        if self.workers < 1 or (self.workers_override is not None and self.workers_override < 1):
            raise ConfigError("workers must be >= 1")
        if self.pruning["begin_epoch"] >= self.pruning["end_epoch"]:
            raise ConfigError("[pruning] begin_epoch must be < end_epoch")
        if self.pruning["frequency"] < 1 or self.pruning["delay_epochs"] < 0:
            raise ConfigError("[pruning] frequency must be >= 1 and delay_epochs >= 0")
        for key in ("scope", "oneshot_scope"):
            if self.pruning[key] not in ("global", "per_layer"):
                raise ConfigError(f"[pruning] {key} must be global or per_layer")
        if self.probe["k"] < 1:
            raise ConfigError("[probe] k must be >= 1")
        for method in self.methods:
            self.train_config(method, 0)
        if "SCL" in self.methods:
            self.augmentation_policy()

    @property
    def seeds(self) -> list:
        return [self.base_seed + i for i in range(self.ensemble_size)]

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def train_config(self, method: str, seed: int) -> TrainConfig:
        """TrainConfig of one ensemble member."""
        d = dict(self.train.get(method, {}))
        preset = d.pop("preset", "desk")
        if preset not in ("desk", "full"):
            raise ConfigError(f"[{method.lower()}] preset must be desk or full")
        base = {}
        if preset == "full":
            base = dict(FULL_SUP if method == "Sup" else FULL_SCL)
        base.update(d)
        base.update({"method": method, "seed": seed})
        try:
            return TrainConfig(base)
        except ConfigError:
            raise
        except PruneLabError as e:
            raise ConfigError(str(e)) from e

    def augmentation_policy(self) -> AugmentationPolicy:
        a = self.augment
        try:
            return AugmentationPolicy(
                noise_sigma=a.get("noise_sigma", 0.1),
                scale_range=(a.get("scale_min", 0.8), a.get("scale_max", 1.2)),
                views_per_sample=a.get("views_per_sample", 2),
            )
        except PruneLabError as e:
            raise ConfigError(f"[augment] {e}") from e

    def workers_effective(self) -> int:
        """Worker count: the -w flag, else PRUNELAB_WORKERS, else [experiment] workers."""
        if self.workers_override is not None:
            return self.workers_override
        value = os.environ.get(WORKERS_ENV)
        if not value:
            return self.workers
        try:
            workers = int(value)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{value}'")
        if workers < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return workers


def _section(parser: configparser.ConfigParser, name: str) -> dict:
    if not parser.has_section(name):
        return {}
    values = {}
    schema = SCHEMA[name]
    for key, raw in parser.items(name):
        if key not in schema:
            raise ConfigError(f"[{name}] unknown key '{key}'")
        try:
            values[key] = schema[key](raw.strip())
        except ValueError as e:
            raise ConfigError(f"[{name}] {key}: {e}") from e
    return values


def parse_config(text: str) -> ExperimentConfig:
    """
    Parse an experiment file.

    Args:
        text: INI text

    Returns:
        ExperimentConfig carrying the original text (its hash identifies the run)

    Raises:
        ConfigError: syntax errors, unknown sections or keys, invalid values
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e

    unknown = set(parser.sections()) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")

    experiment = _section(parser, "experiment")
    pruning = dict(PRUNING_DEFAULTS)
    pruning.update(_section(parser, "pruning"))
    probe = dict(PROBE_DEFAULTS)
    probe.update(_section(parser, "probe"))
    dataset = {"kind": "mixture"}
    dataset.update(_section(parser, "dataset"))

    kwargs = {k: v for k, v in experiment.items() if k not in ("pruning",)}
    if "pruning" in experiment:
        kwargs["pruning_modes"] = experiment["pruning"]
    if "sparsities" in kwargs:
        kwargs["sparsities"] = sorted(kwargs["sparsities"])

    return ExperimentConfig(
        **kwargs,
        dataset=dataset,
        train={"Sup": _section(parser, "sup"), "SCL": _section(parser, "scl")},
        augment=_section(parser, "augment"),
        pruning=pruning,
        probe=probe,
        text=text,
    )


def load_config(path: str) -> ExperimentConfig:
    """Read and parse an experiment file."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())
