"""
Prediction log files: CSV with the columns of metrics.PREDICTION_COLUMNS.
"""

import numpy as np
import pandas as pd

from prune_lab.core.metrics import PREDICTION_COLUMNS
from prune_lab.core.errors import ParseError

_DTYPES = {
    "model_id": np.int64, "method": str, "pruning": str, "sparsity": np.float64,
    "sample_id": np.int64, "predicted_class": np.int64, "true_label": np.int64,
}


def prediction_frame(bundle, dataset, model_id: int) -> pd.DataFrame:
    """Predictions of one bundle on a dataset as a prediction log."""
    prov = bundle.provenance
    return pd.DataFrame({
        "model_id": model_id,
        "method": prov.method,
        "pruning": prov.pruning,
        "sparsity": prov.sparsity,
        "sample_id": dataset.sample_ids,
        "predicted_class": bundle.predict(dataset.features),
        "true_label": dataset.labels,
    }, columns=PREDICTION_COLUMNS)


def write_prediction_log(df: pd.DataFrame, path: str):
    df[PREDICTION_COLUMNS].to_csv(path, index=False, lineterminator="\n")


def read_prediction_log(path: str) -> pd.DataFrame:
    df = pd.read_csv(path, dtype=_DTYPES, keep_default_na=False)
    missing = set(PREDICTION_COLUMNS) - set(df.columns)
    if missing:
        raise ParseError(f"{path}: missing columns {sorted(missing)}", line=1)
    return df[PREDICTION_COLUMNS]
