"""
Binary checkpoint codec.

Layout (little-endian):
    magic "PRNK"
    version u16, tensor count u32
    per tensor: name length u16, UTF-8 name, rank u8, extents u32 * rank,
                float32 payload, mask-present u8, bit-packed mask if present
    metadata length u32, UTF-8 JSON (provenance, layer specs, prunable names)
    CRC32 u32 of everything between the magic and the CRC
"""

import json
import logging
import struct
import zlib

import numpy as np

from prune_lab.core.bundle import ModelBundle, Provenance
from prune_lab.core.numkernel import Network, WeightStore
from prune_lab.core.errors import CorruptCheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"PRNK"
VERSION = 1

_HEADER = struct.Struct("<HI")
_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


def encode_bundle(bundle: ModelBundle) -> bytes:
    store = bundle.store
    names = store.names()
    parts = [_HEADER.pack(VERSION, len(names))]
    for name in names:
        raw_name = name.encode("utf-8")
        value = np.ascontiguousarray(store[name], dtype="<f4")
        parts.append(_U16.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(_U8.pack(value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(value.tobytes())
        mask = store.mask(name)
        if mask is None:
            parts.append(_U8.pack(0))
        else:
            parts.append(_U8.pack(1))
            parts.append(np.packbits(mask.ravel().astype(np.uint8)).tobytes())

    meta = {
        "provenance": bundle.provenance.to_dict(),
        "networks": {
            "encoder": bundle.encoder.to_dict(),
            "classifier": bundle.classifier.to_dict(),
            "projection": None if bundle.projection is None else bundle.projection.to_dict(),
        },
        "prunable": store.prunable_names(),
    }
    raw_meta = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts.append(_U32.pack(len(raw_meta)))
    parts.append(raw_meta)

    body = b"".join(parts)
    return MAGIC + body + _U32.pack(zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpointError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple:
        return fmt.unpack(self.take(fmt.size))


def decode_bundle(data: bytes) -> ModelBundle:
    if len(data) < len(MAGIC) + _HEADER.size + _U32.size:
        raise CorruptCheckpointError("checkpoint is truncated")
    if data[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError("bad magic, not a checkpoint")
    body, (crc,) = data[len(MAGIC):-_U32.size], _U32.unpack(data[-_U32.size:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise CorruptCheckpointError("checksum mismatch")

    reader = _Reader(body)
    version, count = reader.unpack(_HEADER)
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported checkpoint version {version}")

    tensors = []
    for _ in range(count):
        (name_len,) = reader.unpack(_U16)
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.unpack(_U8)
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        value = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
        (has_mask,) = reader.unpack(_U8)
        mask = None
        if has_mask:
            packed = np.frombuffer(reader.take((size + 7) // 8), dtype=np.uint8)
            mask = np.unpackbits(packed)[:size].astype(bool).reshape(shape)
        tensors.append((name, value, mask))

    (meta_len,) = reader.unpack(_U32)
    try:
        meta = json.loads(reader.take(meta_len).decode("utf-8"))
    except ValueError as e:
        raise CorruptCheckpointError(f"unreadable metadata: {e}") from e
    if reader.pos != len(body):
        raise CorruptCheckpointError("trailing bytes after metadata")

    prunable = set(meta["prunable"])
    store = WeightStore(np.float32)
    for name, value, mask in tensors:
        store.register(name, value, prunable=name in prunable)
        if mask is not None:
            store.set_mask(name, mask)

    nets = meta["networks"]
    return ModelBundle(
        encoder=Network.from_dict(nets["encoder"]),
        classifier=Network.from_dict(nets["classifier"]),
        store=store,
        projection=None if nets.get("projection") is None else Network.from_dict(nets["projection"]),
        provenance=Provenance.from_dict(meta["provenance"]),
    )


def checkpoint_write(bundle: ModelBundle, path: str):
    """Write a bundle to path."""
    with open(path, "wb") as f:
        f.write(encode_bundle(bundle))
    logger.debug(f"Wrote checkpoint {path}")


def checkpoint_read(path: str) -> ModelBundle:
    """
    Read a bundle written by checkpoint_write.

    Raises:
        CorruptCheckpointError: bad magic/version, truncation or checksum failure
    """
    with open(path, "rb") as f:
        return decode_bundle(f.read())
