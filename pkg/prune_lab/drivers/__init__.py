"""
Dataset drivers.

Drivers generate or load Datasets for experiments:
- BlobsDriver: Gaussian clusters
- RingsDriver: Concentric rings (not linearly separable)
- MixtureDriver: Rings and blobs in one dataset
- CsvDriver: External CSV files
"""

from .blobs_driver import BlobsDriver, make_blobs
from .rings_driver import RingsDriver, make_rings
from .mixture_driver import MixtureDriver, make_mixture
from .csv_driver import CsvDriver, load_csv, write_csv

DRIVERS = {
    "blobs": BlobsDriver,
    "rings": RingsDriver,
    "mixture": MixtureDriver,
    "csv": CsvDriver,
}


def create_driver(basic_data_set: dict):
    """Instantiate the driver named by basic_data_set['kind']."""
    kind = basic_data_set.get("kind", "mixture")
    if kind not in DRIVERS:
        raise ValueError(f"Unknown dataset kind '{kind}', choose from {sorted(DRIVERS)}")
    return DRIVERS[kind](basic_data_set)


__all__ = [
    'BlobsDriver', 'RingsDriver', 'MixtureDriver', 'CsvDriver', 'DRIVERS', 'create_driver',
    'make_blobs', 'make_rings', 'make_mixture', 'load_csv', 'write_csv',
]
