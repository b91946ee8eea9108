"""
CSV dataset driver.

Format: comma-separated, UTF-8, no header, one sample per line, numeric
features followed by an integer class label in the last column.
"""

import logging
import os

import numpy as np
import pandas as pd

from prune_lab.core.dataset import Dataset
from prune_lab.core.driver import DatasetDriver
from prune_lab.core.errors import ParseError

logger = logging.getLogger(__name__)


def _first_ragged_line(path: str) -> tuple:
    """Return (line number, field count) of the first row whose width differs from line 1."""
    with open(path, "r", encoding="utf-8") as f:
        width = None
        for number, line in enumerate(f, start=1):
            fields = line.rstrip("\n").split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                return number, len(fields)
    return None, None


def _first_undecodable_line(path: str) -> int:
    """Return the number of the first line that is not valid UTF-8."""
    with open(path, "rb") as f:
        for number, raw in enumerate(f, start=1):
            try:
                raw.decode("utf-8")
            except UnicodeDecodeError:
                return number
    return None


def load_csv(path: str, split: str = "train") -> Dataset:
    """
    Read a labelled dataset from CSV.

    Args:
        path: Path to the CSV file
        split: Split tag of the returned Dataset

    Returns:
        Dataset with class_count = 1 + max label

    Raises:
        ParseError: missing file, empty file, invalid UTF-8, ragged rows or non-numeric cells,
            with the offending line number where one exists
    """
    if not os.path.exists(path):
        raise ParseError(f"File not found: {path}")

    try:
        df = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                         skip_blank_lines=False, encoding="utf-8")
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not valid UTF-8", line=_first_undecodable_line(path))
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path} is empty", line=1)
    except pd.errors.ParserError as e:
        line, _ = _first_ragged_line(path)
        raise ParseError(f"ragged row in {path} ({e})", line=line)

    if df.shape[1] < 2:
        raise ParseError(f"{path} needs at least one feature column and a label column", line=1)

    # pandas pads short rows with NaN even with keep_default_na=False
    short = df.isna().any(axis=1)
    if short.any():
        raise ParseError("ragged row", line=int(np.flatnonzero(short.values)[0]) + 1)

    numeric = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna().any(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.values)[0])
        col = int(np.flatnonzero(numeric.iloc[row].isna().values)[0])
        raise ParseError(f"non-numeric cell '{df.iat[row, col]}' in column {col + 1}", line=row + 1)

    labels = numeric.iloc[:, -1].to_numpy()
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        row = int(np.flatnonzero((labels != np.round(labels)) | (labels < 0))[0])
        raise ParseError(f"label '{df.iat[row, df.shape[1] - 1]}' is not a class index", line=row + 1)
    labels = labels.astype(np.int64)
    features = numeric.iloc[:, :-1].to_numpy(dtype=np.float64)

    logger.info(f"Loaded {len(labels)} samples from {path}")
    return Dataset(features, labels, int(labels.max()) + 1, split=split)


def write_csv(dataset: Dataset, path: str):
    """Write a dataset in the format read by load_csv (float32-exact values)."""
    df = pd.DataFrame(dataset.features.astype(np.float64))
    df[df.shape[1]] = dataset.labels
    df.to_csv(path, header=False, index=False, float_format="%.9g", lineterminator="\n")


class CsvDriver(DatasetDriver):
    """Driver for external CSV datasets (train_path / test_path)."""

    def __init__(self, basic_data_set: dict):
        super().__init__(basic_data_set)
        self.train_path = self.basic_data_set.get("train_path")
        self.test_path = self.basic_data_set.get("test_path")

    def load_data(self, split: str = "train", seed: int = None) -> Dataset:
        path = self.train_path if split == "train" else self.test_path
        if not path:
            raise ParseError(f"No CSV path configured for the {split} split")
        self._data = load_csv(path, split=split)
        return self._data
