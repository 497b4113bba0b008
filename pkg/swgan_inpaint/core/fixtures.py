"""
Raw tensor fixture files used to ship oracle data for tests.

Layout (little-endian): magic ``TNSR``, u32 rank, u32 dims[rank], f64 payload.
"""

import struct
from pathlib import Path
from typing import Union

import numpy as np

from swgan_inpaint.core.tensor import Tensor
from swgan_inpaint.errors import ContainerError

FIXTURE_MAGIC = b"TNSR"

PathLike = Union[str, Path]


def save_tensor_fixture(path: PathLike, value: Union[Tensor, np.ndarray]) -> None:
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    header = FIXTURE_MAGIC + struct.pack("<I", array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.astype("<f8").tobytes(order="C"))


def load_tensor_fixture(path: PathLike) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != FIXTURE_MAGIC:
        raise ContainerError(f"{path}: not a tensor fixture (magic {raw[:4]!r})")
    try:
        (rank,) = struct.unpack_from("<I", raw, 4)
        dims = struct.unpack_from(f"<{rank}I", raw, 8)
    except struct.error as e:
        raise ContainerError(f"{path}: truncated fixture header") from e
    offset = 8 + 4 * rank
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - offset != 8 * count:
        raise ContainerError(
            f"{path}: payload holds {len(raw) - offset} bytes, expected {8 * count}"
        )
    return np.frombuffer(raw, dtype="<f8", offset=offset).reshape(dims).astype(np.float64)
