"""Encoder checkpoints: magic "WCSE", versioned, little-endian float64.

Layout (all little-endian):

    bytes 0-3   magic b"WCSE"
    u32         format version (1)
    u32 x3      dim_in, dim_hidden, dim_out
    f64         dropout_rate
    u64         init seed
    f64 arrays  w1 (dim_in*dim_hidden), b1, w2 (dim_hidden*dim_out), b2,
                row-major
    u8          whitening-stats flag
    if 1:       u32 group_size, f64 momentum, f64 ridge_epsilon,
                u32 num_groups, then per group:
                u64 update_count, f64 mean (g), f64 cov (g*g)

The optional block carries the running whitening statistics the encoder
uses at evaluation time (identity grouping), so a saved model evaluates
exactly as it did during training.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .encoder import EncoderState
from .errors import CheckpointError
from .whitening import WhiteningStats

MAGIC = b"WCSE"
VERSION = 1


@dataclass
class EvalWhitening:
    """Identity-plan group whitening applied to eval-time embeddings."""

    group_size: int
    momentum: float
    ridge_epsilon: float
    stats: list  # one WhiteningStats per contiguous channel group


def _pack_array(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CheckpointError("checkpoint truncated")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def take_array(self, count: int, shape) -> np.ndarray:
        size = count * 8
        if self.pos + size > len(self.data):
            raise CheckpointError("checkpoint truncated")
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos)
        self.pos += size
        return arr.astype(np.float64).reshape(shape)

    def done(self) -> bool:
        return self.pos == len(self.data)


def checkpoint_to_bytes(state: EncoderState, whitening: EvalWhitening | None = None) -> bytes:
    parts = [
        struct.pack(
            "<4sIIIIdQ",
            MAGIC,
            VERSION,
            state.dim_in,
            state.dim_hidden,
            state.dim_out,
            state.dropout_rate,
            state.seed,
        ),
        _pack_array(state.w1),
        _pack_array(state.b1),
        _pack_array(state.w2),
        _pack_array(state.b2),
    ]
    if whitening is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(
            struct.pack(
                "<IddI",
                whitening.group_size,
                whitening.momentum,
                whitening.ridge_epsilon,
                len(whitening.stats),
            )
        )
        for stats in whitening.stats:
            parts.append(struct.pack("<Q", stats.update_count))
            parts.append(_pack_array(stats.mean))
            parts.append(_pack_array(stats.cov))
    return b"".join(parts)


def checkpoint_from_bytes(data: bytes):
    reader = _Reader(data)
    magic, version = reader.take("<4sI")
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointError(
            f"incompatible checkpoint version {version}, this build reads {VERSION}"
        )
    d_in, d_h, d_out, dropout_rate, seed = reader.take("<IIIdQ")
    w1 = reader.take_array(d_in * d_h, (d_in, d_h))
    b1 = reader.take_array(d_h, (d_h,))
    w2 = reader.take_array(d_h * d_out, (d_h, d_out))
    b2 = reader.take_array(d_out, (d_out,))
    if not all(np.all(np.isfinite(a)) for a in (w1, b1, w2, b2)):
        raise CheckpointError("checkpoint parameters contain non-finite values")
    state = EncoderState(
        w1=w1, b1=b1, w2=w2, b2=b2, dropout_rate=dropout_rate, seed=seed
    )
    (flag,) = reader.take("<B")
    whitening = None
    if flag == 1:
        group_size, momentum, ridge_epsilon, num_groups = reader.take("<IddI")
        if group_size * num_groups != d_out:
            raise CheckpointError(
                f"whitening block covers {group_size * num_groups} channels, "
                f"encoder emits {d_out}"
            )
        stats = []
        for _ in range(num_groups):
            (count,) = reader.take("<Q")
            mean = reader.take_array(group_size, (group_size,))
            cov = reader.take_array(group_size * group_size, (group_size, group_size))
            stats.append(
                WhiteningStats(
                    mean=mean, cov=cov, momentum=momentum, update_count=int(count)
                )
            )
        whitening = EvalWhitening(
            group_size=group_size,
            momentum=momentum,
            ridge_epsilon=ridge_epsilon,
            stats=stats,
        )
    elif flag != 0:
        raise CheckpointError(f"bad whitening flag {flag}")
    if not reader.done():
        raise CheckpointError("trailing bytes after checkpoint payload")
    return state, whitening


def save_checkpoint(path, state: EncoderState, whitening: EvalWhitening | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_to_bytes(state, whitening))


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return checkpoint_from_bytes(data)
