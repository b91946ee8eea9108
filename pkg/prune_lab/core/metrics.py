"""
Measurement instruments for pruned ensembles.

- PIE: samples whose modal prediction across pruned models differs from the
  modal prediction across the matching dense models.
- Q-Score: Z-Score / L1 norm of an L2-normalized representation.
- PD-Score: earliest probe from which kNN classifiers at that and every deeper
  probe classify the sample correctly.

Prediction logs are pandas DataFrames with the columns of PREDICTION_COLUMNS.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import pandas as pd

from prune_lab.core.errors import (
    CohortError, DegenerateRepresentationError, ParameterError, ShapeError,
)

logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = ["model_id", "method", "pruning", "sparsity", "sample_id",
                      "predicted_class", "true_label"]


@dataclass
class PieRecord:
    sample_id: int
    modal_dense: int
    modal_pruned: int
    is_pie: bool
    true_label: int


@dataclass
class QScoreRecord:
    sample_id: int
    q: float
    z: float
    l1: float


@dataclass
class PdRecord:
    sample_id: int
    depth: int


@dataclass
class PieOverlap:
    shared: list
    unique_a: list
    unique_b: list
    per_class_shared: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class AccuracyStats:
    mean: float
    std: float
    per_model: dict
    single_model: bool = False

    @property
    def models(self) -> int:
        return len(self.per_model)


def modal_class(predictions) -> int:
    """Most frequent class; ties go to the lowest class index."""
    predictions = np.asarray(predictions, dtype=np.int64).ravel()
    if predictions.size == 0:
        raise ParameterError("modal_class needs at least one prediction")
    if predictions.min() < 0:
        raise ParameterError("class indices must be nonnegative")
    return int(np.argmax(np.bincount(predictions)))


def _check_log(log: pd.DataFrame, name: str):
    missing = {"model_id", "sample_id", "predicted_class"} - set(log.columns)
    if missing:
        raise ParameterError(f"{name} log lacks columns {sorted(missing)}")
    dup = log.duplicated(subset=["model_id", "sample_id"])
    if dup.any():
        raise CohortError(f"{name} log repeats (model, sample) pairs for samples",
                          log.loc[dup, "sample_id"].unique().tolist())
    counts = log.groupby("model_id")["sample_id"].nunique()
    all_ids = set(log["sample_id"].unique().tolist())
    if (counts != len(all_ids)).any():
        incomplete = set()
        for _, ids in log.groupby("model_id")["sample_id"]:
            incomplete |= all_ids - set(ids.tolist())
        raise CohortError(f"models in the {name} cohort do not share one sample set", incomplete)


def _modal_per_sample(log: pd.DataFrame) -> pd.Series:
    return log.groupby("sample_id")["predicted_class"].agg(modal_class)


def identify_pies(dense_log: pd.DataFrame, pruned_log: pd.DataFrame) -> list:
    """
    Compare modal predictions of a dense and a pruned cohort.

    Args:
        dense_log: Predictions of the dense (t = 0) models
        pruned_log: Predictions of the t-pruned models

    Returns:
        One PieRecord per sample, ordered by sample_id

    Raises:
        CohortError: when the two cohorts cover different samples
    """
    _check_log(dense_log, "dense")
    _check_log(pruned_log, "pruned")
    dense_ids = set(dense_log["sample_id"].tolist())
    pruned_ids = set(pruned_log["sample_id"].tolist())
    if dense_ids != pruned_ids:
        raise CohortError("dense and pruned cohorts cover different samples", dense_ids ^ pruned_ids)

    dense_modal = _modal_per_sample(dense_log)
    pruned_modal = _modal_per_sample(pruned_log)
    if "true_label" in dense_log.columns:
        truth = dense_log.groupby("sample_id")["true_label"].first()
    else:
        truth = pd.Series(-1, index=dense_modal.index)

    return [
        PieRecord(int(sid), int(dense_modal[sid]), int(pruned_modal[sid]),
                  bool(dense_modal[sid] != pruned_modal[sid]), int(truth[sid]))
        for sid in sorted(dense_ids)
    ]


def qscore(h, sample_id: int = -1) -> QScoreRecord:
    """
    Q-Score of one representation vector.

    h is L2-normalized first; then z = max(h - mean) / std (population std),
    l1 = ||h||_1 and q = z / l1.

    Raises:
        DegenerateRepresentationError: zero or constant vector
    """
    h = np.asarray(h, dtype=np.float64).ravel()
    norm = np.sqrt(np.sum(h ** 2))
    if norm == 0:
        raise DegenerateRepresentationError("zero representation")
    h = h / norm
    mu = h.mean()
    sigma = h.std()
    if sigma == 0 or np.all(h == h[0]):
        raise DegenerateRepresentationError("constant representation")
    z = float(np.max(h - mu) / sigma)
    l1 = float(np.sum(np.abs(h)))
    return QScoreRecord(int(sample_id), z / l1, z, l1)


def qscores(reps, sample_ids) -> tuple:
    """
    Q-Scores of many representations, skipping degenerate ones.

    Returns:
        Tuple (list of QScoreRecord, number skipped)
    """
    records, skipped = [], 0
    for h, sid in zip(np.asarray(reps), sample_ids):
        try:
            records.append(qscore(h, sid))
        except DegenerateRepresentationError:
            skipped += 1
    if skipped:
        logger.warning(f"Q-Score skipped {skipped} degenerate representations")
    return records, skipped


def knn_predict(train_reps, train_labels, query_reps, k: int) -> np.ndarray:
    """
    k-nearest-neighbour majority vote (Euclidean).

    Neighbour ties are broken by train index, vote ties by lowest class.
    """
    train = np.asarray(train_reps, dtype=np.float64)
    query = np.asarray(query_reps, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if k < 1:
        raise ParameterError("k must be >= 1")
    if len(train) == 0:
        raise ParameterError("kNN needs a nonempty train set")
    if k > len(train):
        raise ParameterError(f"k={k} exceeds the train size {len(train)}")
    if train.shape[1] != query.shape[1]:
        raise ShapeError("train and query representations differ in width")

    class_count = int(train_labels.max()) + 1
    preds = np.empty(len(query), dtype=np.int64)
    for i, q in enumerate(query):
        dist = np.sum((train - q) ** 2, axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        preds[i] = int(np.argmax(np.bincount(train_labels[nearest], minlength=class_count)))
    return preds


def pd_score(train_reps: list, train_labels, query_reps: list, query_labels, k: int = 5,
             sample_ids=None) -> list:
    """
    Prediction depth per query sample.

    Args:
        train_reps: One (n_train, d_probe) array per probe, shallow to deep
        train_labels: Labels of the train samples
        query_reps: One (n_query, d_probe) array per probe
        query_labels: True labels of the query samples
        k: Neighbours per vote
        sample_ids: Optional ids of the query samples

    Returns:
        List of PdRecord; depth in [1, L+1], L+1 when no probe suffix is correct
    """
    if len(train_reps) != len(query_reps) or not train_reps:
        raise ParameterError("train and query need the same nonempty probe list")
    query_labels = np.asarray(query_labels, dtype=np.int64)
    if sample_ids is None:
        sample_ids = np.arange(len(query_labels))
    probe_count = len(train_reps)

    correct = np.stack([
        knn_predict(tr, train_labels, qr, k) == query_labels
        for tr, qr in zip(train_reps, query_reps)
    ], axis=1)

    records = []
    for sid, row in zip(sample_ids, correct):
        depth = probe_count + 1
        for d in range(probe_count, 0, -1):
            if not row[d - 1]:
                break
            depth = d
        records.append(PdRecord(int(sid), depth))
    return records


def per_class_pie_distribution(records: list, class_count: int = None) -> np.ndarray:
    """Histogram of PIE samples over their true classes."""
    labels = [r.true_label for r in records if r.is_pie]
    if class_count is None:
        class_count = max([r.true_label for r in records], default=-1) + 1
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=class_count)[:class_count] \
        if class_count > 0 else np.zeros(0, dtype=np.int64)


def pie_overlap(records_a: list, records_b: list, class_count: int = None) -> PieOverlap:
    """
    Shared and unique PIEs of two analyses over the same samples.

    Raises:
        CohortError: when the sample universes differ
    """
    ids_a = {r.sample_id for r in records_a}
    ids_b = {r.sample_id for r in records_b}
    if ids_a != ids_b:
        raise CohortError("PIE analyses cover different samples", ids_a ^ ids_b)
    pies_a = {r.sample_id for r in records_a if r.is_pie}
    pies_b = {r.sample_id for r in records_b if r.is_pie}
    shared = sorted(pies_a & pies_b)
    label_of = {r.sample_id: r.true_label for r in records_a}
    if class_count is None:
        class_count = max(label_of.values(), default=-1) + 1
    per_class = np.bincount(np.asarray([label_of[s] for s in shared], dtype=np.int64),
                            minlength=class_count)[:class_count]
    return PieOverlap(shared, sorted(pies_a - pies_b), sorted(pies_b - pies_a), per_class)


def accuracy_stats(log: pd.DataFrame, true_labels=None) -> AccuracyStats:
    """
    Mean accuracy and sample standard deviation across models.

    Args:
        log: Prediction log; uses its true_label column unless true_labels is given
        true_labels: Optional mapping sample_id -> label

    Returns:
        AccuracyStats; std is 0 with single_model set when only one model exists
    """
    df = log
    if true_labels is not None:
        df = log.assign(true_label=log["sample_id"].map(dict(true_labels)))
    correct = (df["predicted_class"] == df["true_label"])
    per_model = correct.groupby(df["model_id"]).mean()
    per_model = {int(k) if isinstance(k, (int, np.integer)) else k: float(v) for k, v in per_model.items()}
    values = np.array(list(per_model.values()), dtype=np.float64)
    if len(values) == 0:
        raise ParameterError("accuracy_stats needs at least one model")
    if len(values) < 2:
        return AccuracyStats(float(values.mean()), 0.0, per_model, single_model=True)
    return AccuracyStats(float(values.mean()), float(values.std(ddof=1)), per_model)
