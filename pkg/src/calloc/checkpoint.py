"""Binary checkpoint format shared by every trainable localizer.

Byte layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"CALLOCK\\x00"
    8       2     format version (u16, currently 1)
    10      8     architecture tag, ASCII, NUL-padded ("calloc", "dnn", "advdnn")
    18      20    dims: 5 x u32
                    calloc:      n_in, embed_dim, key_dim, n_classes, n_anchors
                    dnn/advdnn:  n_in, hidden1, hidden2, n_classes, 0
    38      8     seed (u64)
    46      4     lesson reached (u32)
    50      32    SHA-256 digest of the anchor training set (zeros if none)
    82      4     array count (u32)
    ...           per array: u16 name length, name (UTF-8), u8 ndim,
                  ndim x u32 shape, then float32 little-endian data
    end-4   4     CRC32 of every preceding byte (u32)

The anchor memory itself is not stored. It is a pure function of the
weights and the training set, so :func:`load_checkpoint` rebuilds it from the
training rows it is given and checks the digest. This keeps the reference
model at about 250 kB.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .baselines import DenseClassifier
from .model import CallocModel, ModelConfig, rebuild_anchor_memory

MAGIC = b"CALLOCK\x00"
FORMAT_VERSION = 1
ARCHS = ("calloc", "dnn", "advdnn")
_HEADER = struct.Struct("<8sH8s5IQI32sI")


class CheckpointError(ValueError):
    """Unreadable, corrupted or incompatible checkpoint."""


def encode_checkpoint(model) -> bytes:
    arch = model.arch
    if arch not in ARCHS:
        raise CheckpointError(f"cannot checkpoint architecture {arch!r}")
    memory = getattr(model, "memory", None)
    digest = bytes.fromhex(memory.digest) if memory is not None else bytes(32)
    state = model.state()
    parts = [
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            arch.encode("ascii").ljust(8, b"\x00"),
            *model.dims(),
            model.seed,
            model.lesson,
            digest,
            len(state),
        )
    ]
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name], dtype="<f4")
        key = name.encode("utf-8")
        parts.append(struct.pack(f"<H{len(key)}sB{arr.ndim}I", len(key), key, arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(model, path) -> int:
    """Write atomically (temp file + rename); returns the file size in bytes."""
    data = encode_checkpoint(model)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str) -> tuple:
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return out

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def decode_checkpoint(data: bytes) -> dict:
    """Parse and validate a checkpoint; returns header fields plus ``state``."""
    if len(data) < _HEADER.size + 4:
        raise CheckpointError("truncated checkpoint")
    if data[:8] != MAGIC:
        raise CheckpointError("not a calloc checkpoint (bad magic)")
    (version,) = struct.unpack_from("<H", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch: checkpoint is corrupted or truncated")
    r = _Reader(body)
    _, _, arch, *dims, seed, lesson, digest, n_arrays = r.take(_HEADER.format)
    arch = arch.rstrip(b"\x00").decode("ascii", errors="replace")
    if arch not in ARCHS:
        raise CheckpointError(f"unknown architecture {arch!r}")
    state = {}
    for _ in range(n_arrays):
        (n,) = r.take("<H")
        name = r.raw(n).decode("utf-8")
        (ndim,) = r.take("<B")
        shape = r.take(f"<{ndim}I")
        count = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(r.raw(4 * count), dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(body):
        raise CheckpointError("trailing bytes after the last array")
    return {
        "arch": arch,
        "dims": tuple(dims),
        "seed": seed,
        "lesson": lesson,
        "digest": digest.hex() if any(digest) else None,
        "state": state,
    }


def load_checkpoint(path, train=None, expect: ModelConfig | None = None):
    """Rebuild a localizer from ``path``.

    ``train`` is ``(x_train_normalized, labels)``. A CALLOC checkpoint that
    was saved with an anchor memory needs it; the digest of the rows must
    match the one recorded at save time. ``expect`` rejects a checkpoint
    whose dimensions differ from a target configuration. Nothing is returned
    unless every check passes.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    info = decode_checkpoint(data)
    dims = info["dims"]
    if info["arch"] == "calloc":
        n_in, embed, key, n_classes, n_anchor = dims
        config = ModelConfig(n_in, n_classes, embed_dim=embed, key_dim=key)
        if expect is not None and (expect.n_in, expect.n_classes, expect.embed_dim, expect.key_dim) != (
            n_in,
            n_classes,
            embed,
            key,
        ):
            raise CheckpointError(f"dimension mismatch: checkpoint has {dims[:4]}, expected {expect}")
        model = CallocModel(config, seed=info["seed"])
    else:
        n_in, h1, h2, n_classes, n_anchor = dims
        if expect is not None and (expect.n_in, expect.n_classes) != (n_in, n_classes):
            raise CheckpointError(f"dimension mismatch: checkpoint has n_in={n_in}, C={n_classes}")
        model = DenseClassifier(n_in, n_classes, hidden=(h1, h2), seed=info["seed"], arch=info["arch"])
    try:
        model.load_state(info["state"])
    except ValueError as exc:
        raise CheckpointError(f"dimension mismatch: {exc}") from exc
    model.lesson = info["lesson"]
    if info["arch"] == "calloc" and info["digest"] is not None:
        if train is None:
            raise CheckpointError("this checkpoint needs its training set to rebuild the anchor memory")
        x, labels = train
        memory = rebuild_anchor_memory(model, x, labels)
        if memory.digest != info["digest"] or len(memory) != n_anchor:
            model.memory = None
            raise CheckpointError("training set does not match the one the checkpoint was saved with")
    return model
