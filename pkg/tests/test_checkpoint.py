"""
Tests for the checkpoint and representation dump codecs.
"""

import pytest
import numpy as np
import tempfile
import struct
import zlib
import os

from prune_lab.core.bundle import build_bundle
from prune_lab.core.pruner import prune_bundle
from prune_lab.utils.checkpoint import (
    MAGIC, encode_bundle, decode_bundle, checkpoint_write, checkpoint_read,
)
from prune_lab.utils.repdump import write_repdump, read_repdump
from prune_lab.core.errors import CorruptCheckpointError, ShapeError


def random_bundle(seed):
    rng = np.random.default_rng(seed)
    bundle = build_bundle(int(rng.integers(2, 5)), int(rng.integers(2, 6)),
                          representation_dim=int(rng.integers(3, 9)),
                          hidden_dims=(int(rng.integers(5, 10)),),
                          with_projection=bool(rng.integers(0, 2)), seed=seed,
                          method="SCL" if seed % 2 else "Sup")
    if rng.uniform() < 0.7:
        prune_bundle(bundle, float(rng.choice([0.25, 0.5, 0.8])), "per_layer")
    return bundle


@pytest.fixture
def tmp_path_ckpt():
    with tempfile.TemporaryDirectory() as tmp:
        yield os.path.join(tmp, "model.prnk")


class TestCheckpoint:
    """Test suite for the bundle codec."""

    @pytest.mark.parametrize("seed", range(100))
    def test_round_trip(self, seed):
        bundle = random_bundle(seed)
        restored = decode_bundle(encode_bundle(bundle))
        assert restored.equals(bundle)
        assert restored.prunable_names() == bundle.prunable_names()
        for name in bundle.store.names():
            if bundle.store.mask(name) is None:
                assert restored.store.mask(name) is None
            else:
                assert np.array_equal(restored.store.mask(name), bundle.store.mask(name))

    def test_file_round_trip(self, tmp_path_ckpt):
        bundle = random_bundle(7)
        checkpoint_write(bundle, tmp_path_ckpt)
        assert checkpoint_read(tmp_path_ckpt).equals(bundle)

    def test_starts_with_magic(self):
        assert encode_bundle(random_bundle(1))[:4] == MAGIC

    def test_sparse_checkpoint_zero_count(self):
        bundle = build_bundle(3, 4, seed=2)
        prune_bundle(bundle, 0.9, "per_layer")
        restored = decode_bundle(encode_bundle(bundle))
        total = sum(restored.store[n].size for n in restored.prunable_names())
        pruned = sum(int(np.sum(~restored.store.mask(n))) for n in restored.prunable_names())
        zeros = sum(int(np.sum(restored.store[n] == 0.0)) for n in restored.prunable_names())
        assert pruned / total == pytest.approx(restored.sparsity())
        assert abs(restored.sparsity() - 0.9) <= 1.0 / total
        assert zeros >= pruned

    @pytest.mark.parametrize("position", [4, 10, 40, -10])
    def test_flipped_byte_fails_checksum(self, position):
        data = bytearray(encode_bundle(random_bundle(3)))
        data[position] ^= 0xFF
        with pytest.raises(CorruptCheckpointError):
            decode_bundle(bytes(data))

    def test_bad_magic(self):
        data = b"XXXX" + encode_bundle(random_bundle(4))[4:]
        with pytest.raises(CorruptCheckpointError, match="magic"):
            decode_bundle(data)

    @pytest.mark.parametrize("keep", [0, 6, 50])
    def test_truncated(self, keep):
        data = encode_bundle(random_bundle(5))
        with pytest.raises(CorruptCheckpointError):
            decode_bundle(data[:keep])
        with pytest.raises(CorruptCheckpointError):
            decode_bundle(data[:-1])

    def test_unknown_version(self):
        data = encode_bundle(random_bundle(6))
        body = struct.pack("<H", 99) + data[6:-4]
        forged = MAGIC + body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        with pytest.raises(CorruptCheckpointError, match="version"):
            decode_bundle(forged)


class TestRepresentationDump:
    """Test suite for representation dumps."""

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        probes = [rng.normal(size=(5, 3)), rng.normal(size=(5, 2))]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "test_reps.rdmp")
            write_repdump(path, [10, 11, 12, 13, 14], [0, 1, 0, 1, 2], probes)
            dump = read_repdump(path)
        assert dump.sample_ids.tolist() == [10, 11, 12, 13, 14]
        assert dump.labels.tolist() == [0, 1, 0, 1, 2]
        assert dump.dims == [3, 2]
        np.testing.assert_array_equal(dump.probe(-1), probes[1].astype(np.float32))

    def test_bundle_probes(self):
        bundle = build_bundle(2, 3, representation_dim=4, hidden_dims=(5,), seed=1)
        x = np.random.default_rng(1).normal(size=(6, 2))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "reps.rdmp")
            write_repdump(path, range(6), [0, 1, 2, 0, 1, 2], bundle.probes(x))
            dump = read_repdump(path)
        assert dump.dims[-1] == 3
        assert dump.dims[-2] == 4

    def test_shape_mismatch(self):
        with tempfile.TemporaryDirectory() as tmp:
            with pytest.raises(ShapeError):
                write_repdump(os.path.join(tmp, "r.rdmp"), [0, 1], [0, 1], [np.zeros((3, 2))])

    def test_truncated(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "r.rdmp")
            write_repdump(path, [0, 1], [0, 1], [np.ones((2, 2))])
            with open(path, "rb") as f:
                data = f.read()
            with open(path, "wb") as f:
                f.write(data[:-3])
            with pytest.raises(CorruptCheckpointError):
                read_repdump(path)

    def test_cut_inside_dims(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "r.rdmp")
            with open(path, "wb") as f:
                f.write(struct.pack("<4sHII", b"RDMP", 1, 5, 3))
            with pytest.raises(CorruptCheckpointError, match="truncated"):
                read_repdump(path)
