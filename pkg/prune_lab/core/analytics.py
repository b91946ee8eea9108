"""
Cohort analytics and report tables.

Collects per-model prediction logs and per-sample scores, groups them into
cohorts (method, pruning, sparsity) and builds the report tables:
PIE counts with accuracy, Q-Score, PD-Score split by PIE membership,
per-class PIE distributions and Sup/SCL PIE overlaps.
"""

import logging
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

from prune_lab.core.metrics import (
    PREDICTION_COLUMNS, identify_pies, accuracy_stats, per_class_pie_distribution,
    pie_overlap, qscores, pd_score,
)
from prune_lab.core.errors import ParameterError

logger = logging.getLogger(__name__)

METHOD_ORDER = ("Sup", "SCL")
PRUNING_ORDER = ("GMP", "DeltaGMP", "OneShot")
DENSE = "None"

PIE_COLUMNS = ["Method", "Pruning", "Sparsity", "PIE", "Acc", "Models"]
Q_COLUMNS = ["Method", "Pruning", "Sparsity", "Q", "Z", "L1"]
PD_COLUMNS = ["Method", "Pruning", "Sparsity", "PD_PIE", "PD_nonPIE"]
PER_CLASS_COLUMNS = ["Method", "Pruning", "Sparsity", "Class", "PIE"]
OVERLAP_COLUMNS = ["Pruning", "Sparsity", "Class", "Shared", "Unique_Sup", "Unique_SCL"]


def percent(sparsity: float) -> int:
    return int(round(float(sparsity) * 100))


def mean_std(values) -> tuple:
    """Mean and sample standard deviation; std is 0 for fewer than two values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return None
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), std


def format_pm(values, scale: float = 1.0) -> str:
    """'mean ± std' with two decimals, '-' for an empty selection."""
    stats = mean_std(values)
    if stats is None:
        return "-"
    return f"{stats[0] * scale:.2f} ± {stats[1] * scale:.2f}"


def paired_scores(dense_scores: pd.Series, pruned_scores: pd.Series) -> pd.DataFrame:
    """
    Join per-sample scores of a dense and a pruned cohort.

    Args:
        dense_scores: Series indexed by sample_id
        pruned_scores: Series indexed by sample_id

    Returns:
        DataFrame with columns sample_id, dense, pruned over the shared samples
    """
    df = pd.concat([dense_scores.rename("dense"), pruned_scores.rename("pruned")],
                   axis=1, join="inner").sort_index()
    df.index.name = "sample_id"
    return df.reset_index()


def score_model(test_dump, train_dump=None, k: int = 5, q_probe: int = -2) -> tuple:
    """
    Q-Score and PD-Score of one model from its representation dumps.

    Args:
        test_dump: RepresentationDump of the test set
        train_dump: RepresentationDump of the train set (PD skipped when None)
        k: Neighbours for the PD kNN probes
        q_probe: Probe holding the final encoder representation

    Returns:
        Tuple (Q DataFrame [sample_id, q, z, l1], PD DataFrame [sample_id, depth] or None)
    """
    records, _ = qscores(test_dump.probe(q_probe), test_dump.sample_ids)
    q_df = pd.DataFrame([vars(r) for r in records], columns=["sample_id", "q", "z", "l1"])
    pd_df = None
    if train_dump is not None:
        depth = pd_score(train_dump.probes, train_dump.labels, test_dump.probes,
                         test_dump.labels, k=k, sample_ids=test_dump.sample_ids)
        pd_df = pd.DataFrame([vars(r) for r in depth], columns=["sample_id", "depth"])
    return q_df, pd_df


class PruningAnalytics:
    """Collect per-model results and build cohort tables."""

    def __init__(self, basic_data_set: dict = None):
        """
        Initialize analytics.

        Args:
            basic_data_set: Configuration dict with optional class_count
        """
        self.basic_data_set = dict(basic_data_set or {})
        self.class_count = self.basic_data_set.get("class_count")
        self.runs = []
        self._pie_cache = {}

    def add_run(self, method: str, pruning: str, sparsity: float, seed: int,
                predictions: pd.DataFrame, q_scores: pd.DataFrame = None,
                pd_scores: pd.DataFrame = None):
        """
        Add one completed model.

        Args:
            method: "Sup" or "SCL"
            pruning: "None" for the dense cohort, else the pruning mode
            sparsity: Target sparsity of the model
            seed: Model seed, used as model_id within the cohort
            predictions: Prediction log of the model on the test set
            q_scores: Optional per-sample Q-Scores
            pd_scores: Optional per-sample prediction depths
        """
        missing = set(PREDICTION_COLUMNS) - set(predictions.columns)
        if missing:
            raise ParameterError(f"prediction log lacks columns {sorted(missing)}")
        if pruning == DENSE and sparsity != 0:
            raise ParameterError("dense runs must have sparsity 0")
        self.runs.append({
            "method": method, "pruning": pruning, "sparsity": float(sparsity), "seed": int(seed),
            "predictions": predictions, "q": q_scores, "pd": pd_scores,
        })
        self._pie_cache.clear()

    def methods(self) -> list:
        present = {r["method"] for r in self.runs}
        return [m for m in METHOD_ORDER if m in present]

    def prunings(self, method: str = None) -> list:
        present = {r["pruning"] for r in self.runs if method is None or r["method"] == method}
        return [p for p in PRUNING_ORDER if p in present]

    def sparsities(self, method: str, pruning: str) -> list:
        return sorted({r["sparsity"] for r in self.runs
                       if r["method"] == method and r["pruning"] == pruning and r["sparsity"] > 0})

    def cohort(self, method: str, pruning: str, sparsity: float) -> list:
        if sparsity == 0:
            pruning = DENSE
        return sorted((r for r in self.runs if r["method"] == method and r["pruning"] == pruning
                       and r["sparsity"] == sparsity), key=lambda r: r["seed"])

    def has_dense(self, method: str) -> bool:
        return bool(self.cohort(method, DENSE, 0.0))

    def cohort_log(self, method: str, pruning: str, sparsity: float) -> pd.DataFrame:
        runs = self.cohort(method, pruning, sparsity)
        if not runs:
            return pd.DataFrame(columns=PREDICTION_COLUMNS)
        return pd.concat([r["predictions"] for r in runs], ignore_index=True)

    def _classes(self) -> int:
        if self.class_count is not None:
            return int(self.class_count)
        return int(max(r["predictions"]["true_label"].max() for r in self.runs)) + 1

    def pie_records(self, method: str, pruning: str, sparsity: float) -> list:
        key = (method, pruning, sparsity)
        if key not in self._pie_cache:
            self._pie_cache[key] = identify_pies(self.cohort_log(method, DENSE, 0.0),
                                                 self.cohort_log(method, pruning, sparsity))
        return self._pie_cache[key]

    def pie_ids(self, method: str, pruning: str, sparsity: float) -> set:
        return {r.sample_id for r in self.pie_records(method, pruning, sparsity) if r.is_pie}

    def dense_pie_ids(self, method: str) -> set:
        """Union of the method's PIEs over every pruning mode and sparsity."""
        ids = set()
        for pruning in self.prunings(method):
            for s in self.sparsities(method, pruning):
                if self.cohort(method, pruning, s):
                    ids |= self.pie_ids(method, pruning, s)
        return ids

    def sample_scores(self, method: str, pruning: str, sparsity: float, column: str) -> pd.Series:
        """Per-sample score averaged over the models of a cohort."""
        source = "pd" if column == "depth" else "q"
        frames = [r[source] for r in self.cohort(method, pruning, sparsity) if r[source] is not None]
        if not frames:
            return pd.Series(dtype=np.float64, name=column)
        return pd.concat(frames, ignore_index=True).groupby("sample_id")[column].mean()

    def _rows(self):
        for method in self.methods():
            for pruning in self.prunings(method):
                for s in [0.0] + self.sparsities(method, pruning):
                    yield method, pruning, s

    def pie_table(self) -> pd.DataFrame:
        rows = []
        for method, pruning, s in self._rows():
            runs = self.cohort(method, pruning, s)
            log = self.cohort_log(method, pruning, s)
            acc = "-"
            if runs:
                stats = accuracy_stats(log)
                acc = f"{stats.mean * 100:.2f} ± {stats.std * 100:.2f}"
            pie = "-"
            if s > 0 and runs:
                pie = str(len(self.pie_ids(method, pruning, s)))
            rows.append([method, pruning, percent(s), pie, acc, len(runs)])
        return pd.DataFrame(rows, columns=PIE_COLUMNS)

    def q_table(self) -> pd.DataFrame:
        rows = []
        for method, pruning, s in self._rows():
            cells = [format_pm(self.sample_scores(method, pruning, s, c)) for c in ("q", "z", "l1")]
            rows.append([method, pruning, percent(s), *cells])
        return pd.DataFrame(rows, columns=Q_COLUMNS)

    def pd_table(self) -> pd.DataFrame:
        rows = []
        for method, pruning, s in self._rows():
            depth = self.sample_scores(method, pruning, s, "depth")
            if s == 0:
                pies = self.dense_pie_ids(method)
            elif self.cohort(method, pruning, s):
                pies = self.pie_ids(method, pruning, s)
            else:
                pies = set()
            is_pie = depth.index.isin(list(pies))
            rows.append([method, pruning, percent(s), format_pm(depth[is_pie]), format_pm(depth[~is_pie])])
        return pd.DataFrame(rows, columns=PD_COLUMNS)

    def per_class_table(self) -> pd.DataFrame:
        rows = []
        classes = self._classes()
        for method, pruning, s in self._rows():
            if s == 0 or not self.cohort(method, pruning, s):
                continue
            counts = per_class_pie_distribution(self.pie_records(method, pruning, s), classes)
            rows.extend([method, pruning, percent(s), c, int(n)] for c, n in enumerate(counts))
        return pd.DataFrame(rows, columns=PER_CLASS_COLUMNS)

    def overlap(self, pruning: str, sparsity: float):
        """Sup/SCL PIE overlap of one (pruning, sparsity) cell, None if a side is missing."""
        if any(not self.cohort(m, pruning, sparsity) or not self.has_dense(m) for m in METHOD_ORDER):
            return None
        return pie_overlap(self.pie_records("Sup", pruning, sparsity),
                           self.pie_records("SCL", pruning, sparsity), self._classes())

    def overlap_table(self) -> pd.DataFrame:
        rows = []
        classes = self._classes() if self.runs else 0
        for pruning in PRUNING_ORDER:
            shared_s = sorted(set(self.sparsities("Sup", pruning)) & set(self.sparsities("SCL", pruning)))
            for s in shared_s:
                result = self.overlap(pruning, s)
                if result is None:
                    continue
                labels = {r.sample_id: r.true_label for r in self.pie_records("Sup", pruning, s)}
                unique_a = np.bincount(np.asarray([labels[i] for i in result.unique_a], dtype=np.int64), minlength=classes)
                unique_b = np.bincount(np.asarray([labels[i] for i in result.unique_b], dtype=np.int64), minlength=classes)
                for c in range(classes):
                    rows.append([pruning, percent(s), c, int(result.per_class_shared[c]),
                                 int(unique_a[c]), int(unique_b[c])])
        return pd.DataFrame(rows, columns=OVERLAP_COLUMNS)

    def paired_scores(self, method: str, pruning: str, sparsity: float, column: str) -> pd.DataFrame:
        return paired_scores(self.sample_scores(method, DENSE, 0.0, column),
                             self.sample_scores(method, pruning, sparsity, column))

    def write_reports(self, out_dir: str, plots: bool = True) -> list:
        """
        Write every table as CSV (and figures when plots is set).

        Returns:
            List of written paths
        """
        os.makedirs(out_dir, exist_ok=True)
        tables = {
            "pie_table.csv": self.pie_table(),
            "qscore_table.csv": self.q_table(),
            "pd_table.csv": self.pd_table(),
            "pie_per_class.csv": self.per_class_table(),
            "pie_overlap.csv": self.overlap_table(),
        }
        written = []
        for name, df in tables.items():
            path = os.path.join(out_dir, name)
            df.to_csv(path, index=False, lineterminator="\n")
            written.append(path)
        if plots:
            written.extend(self.create_visualization(out_dir))
        return written

    def create_visualization(self, out_dir: str) -> list:
        """PIE distribution bars and dense-vs-pruned score scatters at the highest sparsity."""
        written = []
        for pruning in PRUNING_ORDER:
            shared_s = sorted(set(self.sparsities("Sup", pruning)) & set(self.sparsities("SCL", pruning)))
            if shared_s and self.overlap(pruning, shared_s[-1]) is not None:
                path = os.path.join(out_dir, f"fig_pie_distribution_{pruning}.png")
                self.plot_pie_distribution(pruning, shared_s[-1], path)
                written.append(path)
        for method in self.methods():
            for pruning in self.prunings(method):
                sparsities = self.sparsities(method, pruning)
                if not sparsities:
                    continue
                path = os.path.join(out_dir, f"fig_scores_{method}_{pruning}.png")
                if self.plot_paired_scores(method, pruning, sparsities[-1], path):
                    written.append(path)
        return written

    def plot_pie_distribution(self, pruning: str, sparsity: float, path: str):
        """Per-class PIE bars: strong colors shared by Sup and SCL, light colors unique."""
        table = self.overlap_table()
        cell = table[(table["Pruning"] == pruning) & (table["Sparsity"] == percent(sparsity))]
        x = cell["Class"].to_numpy()
        width = 0.4
        palette = sns.color_palette("deep", 2)

        fig, ax = plt.subplots(figsize=(8, 4))
        ax.bar(x - width / 2, cell["Shared"], width, color=palette[0], label="Sup shared")
        ax.bar(x - width / 2, cell["Unique_Sup"], width, bottom=cell["Shared"],
               color=palette[0], alpha=0.4, label="Sup unique")
        ax.bar(x + width / 2, cell["Shared"], width, color=palette[1], label="SCL shared")
        ax.bar(x + width / 2, cell["Unique_SCL"], width, bottom=cell["Shared"],
               color=palette[1], alpha=0.4, label="SCL unique")
        ax.set_xlabel("Class")
        ax.set_ylabel("PIEs")
        ax.set_title(f"PIE distribution, {pruning} at {percent(sparsity)}% sparsity")
        ax.set_xticks(x)
        ax.legend()
        ax.grid(True, alpha=0.3)
        plt.tight_layout()
        plt.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)

    def plot_paired_scores(self, method: str, pruning: str, sparsity: float, path: str) -> bool:
        panels = [(c, label) for c, label in (("q", "Q-Score"), ("depth", "PD-Score"))
                  if len(self.paired_scores(method, pruning, sparsity, c))]
        if not panels:
            return False
        fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 5), squeeze=False)
        for ax, (column, label) in zip(axes[0], panels):
            df = self.paired_scores(method, pruning, sparsity, column)
            df["PIE"] = df["sample_id"].isin(list(self.pie_ids(method, pruning, sparsity)))
            sns.scatterplot(data=df, x="dense", y="pruned", hue="PIE", ax=ax, s=15)
            lo, hi = df[["dense", "pruned"]].min().min(), df[["dense", "pruned"]].max().max()
            ax.plot([lo, hi], [lo, hi], color="gray", linewidth=0.8)
            ax.set_xlabel(f"{label} dense")
            ax.set_ylabel(f"{label} at {percent(sparsity)}%")
            ax.set_title(f"{method} / {pruning}")
            ax.grid(True, alpha=0.3)
        plt.tight_layout()
        plt.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        return True

    def print_summary(self):
        """Print the report tables."""
        if not self.runs:
            print("No runs to display.")
            return
        for title, df in (("PIEs and accuracy [%]", self.pie_table()),
                          ("Q-Score", self.q_table()),
                          ("PD-Score (PIE vs non-PIE)", self.pd_table())):
            print(f"\n{'=' * 80}")
            print(title)
            print(f"{'=' * 80}")
            print(df.to_string(index=False))
