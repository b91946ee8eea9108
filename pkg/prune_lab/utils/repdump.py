"""
Representation dump codec.

Layout (little-endian):
    magic "RDMP", version u16, probe_count u32, sample_count u32,
    dim per probe u32 * probe_count,
    per sample: sample_id u64, true_label u32, float32 vectors of every probe
"""

from dataclasses import dataclass
import struct

import numpy as np

from prune_lab.core.errors import CorruptCheckpointError, ShapeError

MAGIC = b"RDMP"
VERSION = 1

_HEADER = struct.Struct("<4sHII")


@dataclass
class RepresentationDump:
    """Probe activations of a set of samples; probes[d] has shape (n, dims[d])."""

    sample_ids: np.ndarray
    labels: np.ndarray
    probes: list

    @property
    def dims(self) -> list:
        return [p.shape[1] for p in self.probes]

    def probe(self, depth: int) -> np.ndarray:
        return self.probes[depth]


def write_repdump(path: str, sample_ids, labels, probes: list):
    """Write per-sample probe activations."""
    sample_ids = np.asarray(sample_ids, dtype="<u8")
    labels = np.asarray(labels, dtype="<u4")
    probes = [np.ascontiguousarray(p, dtype="<f4") for p in probes]
    n = len(sample_ids)
    if any(p.ndim != 2 or p.shape[0] != n for p in probes) or len(labels) != n:
        raise ShapeError("every probe needs one row per sample")

    record = np.dtype([("sample_id", "<u8"), ("label", "<u4")]
                      + [(f"p{i}", "<f4", (p.shape[1],)) for i, p in enumerate(probes)])
    rows = np.zeros(n, dtype=record)
    rows["sample_id"] = sample_ids
    rows["label"] = labels
    for i, p in enumerate(probes):
        rows[f"p{i}"] = p

    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(probes), n))
        f.write(struct.pack(f"<{len(probes)}I", *[p.shape[1] for p in probes]))
        f.write(rows.tobytes())


def read_repdump(path: str) -> RepresentationDump:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise CorruptCheckpointError(f"{path}: representation dump is truncated")
    magic, version, probe_count, n = _HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != VERSION:
        raise CorruptCheckpointError(f"{path}: not a version-{VERSION} representation dump")
    offset = _HEADER.size
    if len(data) < offset + 4 * probe_count:
        raise CorruptCheckpointError(f"{path}: representation dump is truncated")
    dims = struct.unpack_from(f"<{probe_count}I", data, offset)
    offset += 4 * probe_count

    record = np.dtype([("sample_id", "<u8"), ("label", "<u4")]
                      + [(f"p{i}", "<f4", (d,)) for i, d in enumerate(dims)])
    if len(data) - offset != n * record.itemsize:
        raise CorruptCheckpointError(f"{path}: representation dump is truncated")
    rows = np.frombuffer(data, dtype=record, count=n, offset=offset)
    return RepresentationDump(
        sample_ids=rows["sample_id"].astype(np.int64),
        labels=rows["label"].astype(np.int64),
        probes=[rows[f"p{i}"].astype(np.float32).reshape(n, d) for i, d in enumerate(dims)],
    )
