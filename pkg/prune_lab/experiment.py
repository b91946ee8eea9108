"""
Experiment grid: seeded ensembles over (method x pruning x sparsity).

Every cell trains (or prunes and fine-tunes) one model and writes its
checkpoint, step log, test-set predictions and representation dumps into its
own directory. The manifest records finished cells so an interrupted grid
resumes where it stopped. diagnose and report read only manifest-listed files.
"""

from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
import json
import hashlib
import logging
import math
import os
import sys
import time

from prune_lab.core.analytics import PruningAnalytics, score_model, DENSE
from prune_lab.core.errors import ConfigError, ProtocolError, PruneLabError
from prune_lab.core.pruner import SparsitySchedule
from prune_lab.core.trainer import train_sup, train_scl, finetune, write_step_log
from prune_lab.drivers import create_driver
from prune_lab.pruning_strategies import gmp_hook, delayed_gmp_hook, one_shot_prune
from prune_lab.utils.checkpoint import checkpoint_read, checkpoint_write
from prune_lab.utils.config import ExperimentConfig, load_config, parse_config
from prune_lab.utils.prediction_log import prediction_frame, read_prediction_log, write_prediction_log
from prune_lab.utils.repdump import read_repdump, write_repdump

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
CELL_FILES = {
    "checkpoint": "model.prnk",
    "step_log": "steps.jsonl",
    "predictions": "predictions.csv",
    "test_reps": "test_reps.rdmp",
    "train_reps": "train_reps.rdmp",
}


def cell_dir(method: str, pruning: str, sparsity: float, seed: int) -> str:
    return os.path.join("runs", method, pruning, f"s{sparsity:g}", f"seed{seed}")


def cell_key(method: str, pruning: str, sparsity: float, seed: int) -> str:
    return f"{method}/{pruning}/{sparsity:g}/{seed}"


def make_cell(method: str, pruning: str, sparsity: float, seed: int) -> dict:
    return {
        "key": cell_key(method, pruning, sparsity, seed),
        "method": method,
        "pruning": pruning,
        "sparsity": float(sparsity),
        "seed": int(seed),
        "dir": cell_dir(method, pruning, sparsity, seed),
    }


def load_datasets(config: ExperimentConfig) -> tuple:
    """Train and test split of the configured dataset."""
    try:
        driver = create_driver(dict(config.dataset))
    except ValueError as e:
        raise ConfigError(f"[dataset] {e}") from e
    return driver.load_data("train"), driver.load_data("test")


def pruning_hook(config: ExperimentConfig, pruning: str, sparsity: float, steps_per_epoch: int):
    """GMP or ΔGMP step hook of a cell; schedule endpoints are given in epochs."""
    p = config.pruning
    schedule = SparsitySchedule(
        final_sparsity=sparsity,
        begin_step=p["begin_epoch"] * steps_per_epoch,
        end_step=p["end_epoch"] * steps_per_epoch,
        frequency=p["frequency"],
        initial_sparsity=min(p["initial_sparsity"], sparsity),
    )
    if pruning == "GMP":
        return gmp_hook(schedule, p["scope"])
    return delayed_gmp_hook(schedule, p["delay_epochs"], steps_per_epoch, p["scope"])


def _train_cell(config: ExperimentConfig, cell: dict, train, root: str) -> tuple:
    method, pruning, sparsity = cell["method"], cell["pruning"], cell["sparsity"]
    train_config = config.train_config(method, cell["seed"])

    if pruning == "OneShot":
        dense = make_cell(method, DENSE, 0.0, cell["seed"])
        dense_path = os.path.join(root, dense["dir"], CELL_FILES["checkpoint"])
        if not os.path.exists(dense_path):
            raise ProtocolError(f"dense model {dense['key']} is missing")
        pruned = one_shot_prune(checkpoint_read(dense_path), sparsity, config.pruning["oneshot_scope"])
        step_log = []
        bundle = finetune(pruned, train, train_config.finetune_epochs, train_config.finetune_lr,
                          train_config, step_log=step_log)
        return bundle, step_log

    hook = None
    if pruning != DENSE:
        hook = pruning_hook(config, pruning, sparsity, math.ceil(len(train) / train_config.batch_size))
    if method == "Sup":
        bundle, step_log = train_sup(train, train_config, hook)
    else:
        bundle, step_log = train_scl(train, train_config, config.augmentation_policy(), hook)
    bundle.provenance.sparsity = float(sparsity)
    bundle.provenance.pruning = pruning
    return bundle, step_log


def run_cell(config: ExperimentConfig, cell: dict, train, test, root: str) -> dict:
    """
    Train one cell and write its artifacts.

    Returns:
        Manifest entry; status "failed" with the error message when training fails
    """
    start = time.time()
    entry = {k: cell[k] for k in ("key", "method", "pruning", "sparsity", "seed")}
    try:
        bundle, step_log = _train_cell(config, cell, train, root)
    except PruneLabError as e:
        logger.warning(f"Cell {cell['key']} failed: {e}")
        entry.update({"status": "failed", "error": str(e), "files": {},
                      "wall_clock": round(time.time() - start, 3)})
        return entry

    out = os.path.join(root, cell["dir"])
    os.makedirs(out, exist_ok=True)
    files = {name: os.path.join(cell["dir"], fname) for name, fname in CELL_FILES.items()}
    checkpoint_write(bundle, os.path.join(root, files["checkpoint"]))
    write_step_log(step_log, os.path.join(root, files["step_log"]))
    write_prediction_log(prediction_frame(bundle, test, cell["seed"]), os.path.join(root, files["predictions"]))
    write_repdump(os.path.join(root, files["test_reps"]), test.sample_ids, test.labels, bundle.probes(test.features))
    write_repdump(os.path.join(root, files["train_reps"]), train.sample_ids, train.labels,
                  bundle.probes(train.features))

    entry.update({
        "status": "done",
        "files": files,
        "achieved_sparsity": bundle.sparsity(),
        "test_accuracy": bundle.accuracy(test.features, test.labels),
        "wall_clock": round(time.time() - start, 3),
    })
    logger.info(f"Cell {cell['key']} done: accuracy {entry['test_accuracy']:.3f}, "
                f"sparsity {entry['achieved_sparsity']:.3f}")
    return entry


def write_manifest(manifest: dict, path: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)


def read_manifest(path: str) -> dict:
    """
    Read a manifest and verify it against its stored config.

    Raises:
        ProtocolError: unreadable manifest or config hash mismatch
    """
    if not os.path.exists(path):
        raise ProtocolError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except ValueError as e:
            raise ProtocolError(f"unreadable manifest {path}: {e}") from e
    digest = hashlib.sha256(manifest.get("config", "").encode("utf-8")).hexdigest()
    if digest != manifest.get("config_hash"):
        raise ProtocolError(f"{path}: stored config does not match its hash")
    return manifest


def entry_complete(root: str, entry: dict) -> bool:
    return (entry.get("status") == "done"
            and all(os.path.exists(os.path.join(root, p)) for p in entry.get("files", {}).values()))


class ExperimentGrid:
    """Seeded ensemble runs over the configured grid."""

    def __init__(self, config: ExperimentConfig, output_dir: str = None):
        """
        Args:
            config: Parsed experiment file
            output_dir: Override of config.output_dir
        """
        self.config = config
        self.root = output_dir or config.output_dir
        self.manifest_path = os.path.join(self.root, MANIFEST)

    def dense_cells(self) -> list:
        return [make_cell(m, DENSE, 0.0, seed) for m in self.config.methods for seed in self.config.seeds]

    def pruned_cells(self) -> list:
        return [make_cell(m, p, s, seed)
                for m in self.config.methods
                for p in self.config.pruning_modes
                for s in self.config.sparsities if s > 0
                for seed in self.config.seeds]

    def cells(self) -> list:
        """All cells; dense models once per method, shared by every pruning mode."""
        return self.dense_cells() + self.pruned_cells()

    def _load_manifest(self, class_count: int) -> dict:
        manifest = {"config_hash": self.config.config_hash, "config": self.config.text,
                    "name": self.config.name, "class_count": int(class_count), "runs": {}}
        if os.path.exists(self.manifest_path):
            previous = read_manifest(self.manifest_path)
            if previous["config_hash"] != self.config.config_hash:
                raise ConfigError(f"{self.root} holds a grid of a different config")
            manifest["runs"] = previous.get("runs", {})
        return manifest

    def _execute(self, cells: list, train, test) -> list:
        workers = self.config.workers_effective()
        if workers == 1 or len(cells) < 2:
            return [run_cell(self.config, c, train, test, self.root) for c in cells]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, repeat(self.config), cells, repeat(train),
                                 repeat(test), repeat(self.root)))

    def run_grid(self) -> dict:
        """
        Run every unfinished cell.

        Dense cells run first since One-Shot cells prune the dense checkpoints.
        Completed cells found in the manifest are skipped.

        Returns:
            Manifest dict (also written to output_dir/manifest.json)
        """
        train, test = load_datasets(self.config)
        os.makedirs(self.root, exist_ok=True)
        manifest = self._load_manifest(train.class_count)

        for phase in (self.dense_cells(), self.pruned_cells()):
            todo = [c for c in phase if not entry_complete(self.root, manifest["runs"].get(c["key"], {}))]
            logger.info(f"{len(phase) - len(todo)} of {len(phase)} cells already done")
            for entry in self._execute(todo, train, test):
                manifest["runs"][entry["key"]] = entry
            manifest["artifacts"] = sorted(p for e in manifest["runs"].values() for p in e["files"].values())
            write_manifest(manifest, self.manifest_path)

        failed = self.failed(manifest)
        if failed:
            logger.warning(f"{len(failed)} cells failed: {failed}")
        return manifest

    @staticmethod
    def failed(manifest: dict) -> list:
        return sorted(k for k, e in manifest["runs"].items() if e.get("status") != "done")


def load_analytics(manifest_path: str) -> PruningAnalytics:
    """
    Score every finished model of a manifest.

    Raises:
        ProtocolError: a listed file is missing, no model finished, or a
            method with pruned cohorts lacks its dense cohort
    """
    manifest = read_manifest(manifest_path)
    root = os.path.dirname(os.path.abspath(manifest_path))
    config = parse_config(manifest["config"])
    probe = config.probe
    analytics = PruningAnalytics({"class_count": manifest["class_count"]})

    for key in sorted(manifest["runs"]):
        entry = manifest["runs"][key]
        if entry.get("status") != "done":
            continue
        paths = {name: os.path.join(root, p) for name, p in entry["files"].items()}
        missing = [p for p in paths.values() if not os.path.exists(p)]
        if missing:
            raise ProtocolError(f"cell {key}: missing files {missing}")
        test_dump = read_repdump(paths["test_reps"])
        train_dump = read_repdump(paths["train_reps"]) if probe["pd"] else None
        q_df, pd_df = score_model(test_dump, train_dump, k=probe["k"], q_probe=probe["q_probe"])
        analytics.add_run(entry["method"], entry["pruning"], entry["sparsity"], entry["seed"],
                          read_prediction_log(paths["predictions"]), q_df, pd_df)

    if not analytics.runs:
        raise ProtocolError("manifest lists no finished models")
    for method in analytics.methods():
        if analytics.prunings(method) and not analytics.has_dense(method):
            raise ProtocolError(f"{method}: dense cohort missing, PIEs are undefined")
    return analytics


def diagnose(manifest_path: str) -> list:
    """Write the diagnostics tables next to the manifest."""
    out = os.path.join(os.path.dirname(os.path.abspath(manifest_path)), "diagnostics")
    return load_analytics(manifest_path).write_reports(out, plots=False)


def report(manifest_path: str, out_dir: str, plots: bool = True) -> list:
    """Write tables and figures to out_dir and print the summary."""
    analytics = load_analytics(manifest_path)
    written = analytics.write_reports(out_dir, plots=plots)
    analytics.print_summary()
    return written


def prune_checkpoint(path: str, sparsity: float, out: str = None, scope: str = "global",
                     config: ExperimentConfig = None) -> str:
    """
    One-shot prune a checkpoint, fine-tuning when a config is given.

    Returns:
        Path of the written checkpoint
    """
    bundle = one_shot_prune(checkpoint_read(path), sparsity, scope)
    if config is not None:
        train, _ = load_datasets(config)
        train_config = config.train_config(bundle.provenance.method, bundle.provenance.seed)
        bundle = finetune(bundle, train, train_config.finetune_epochs, train_config.finetune_lr, train_config)
    out = out or f"{os.path.splitext(path)[0]}_oneshot_s{sparsity:g}.prnk"
    checkpoint_write(bundle, out)
    print(f"Pruned to {bundle.sparsity():.4f} sparsity: {out}")
    return out


def main(argv=None) -> int:
    """Entry point of the prunelab command."""
    from prune_lab.utils.cli import create_parser

    args = create_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARN,
                        format='%(asctime)s - %(levelname)s - %(message)s')

    try:
        if args.command == "train":
            config = load_config(args.config)
            if args.workers is not None:
                config.workers_override = args.workers
                config.validate()
            grid = ExperimentGrid(config, args.output_dir)
            manifest = grid.run_grid()
            failed = grid.failed(manifest)
            print(f"{len(manifest['runs']) - len(failed)} of {len(manifest['runs'])} cells done: "
                  f"{grid.manifest_path}")
            return 1 if failed else 0
        if args.command == "prune":
            config = load_config(args.config) if args.config else None
            prune_checkpoint(args.checkpoint, args.sparsity, args.out, args.scope, config)
            return 0
        if args.command == "diagnose":
            for path in diagnose(args.manifest):
                print(path)
            return 0
        if args.command == "report":
            report(args.manifest, args.out, plots=not args.no_plots)
            return 0
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except (PruneLabError, OSError) as e:
        logger.error(str(e))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
