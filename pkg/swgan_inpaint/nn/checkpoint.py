"""
Binary container for model parameters, optimizer state and extractor weights.

Layout, little-endian:

    magic        4 bytes   b"SWGN" (checkpoints) or b"FEXT" (feature-extractor weights)
    version      u32
    meta_len     u32, then meta_len bytes of UTF-8 JSON
    n_entries    u32
    entries      n_entries x (u16 name_len, name, u8 dtype, u32 rank, u32 dims[rank], u64 offset, u64 nbytes)
    payload      concatenated raw arrays, offsets relative to payload start
    sha256       32-byte digest of every preceding byte
"""

import hashlib
import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np

from swgan_inpaint.errors import ChecksumError, ContainerError, VersionError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SWGN"
FEATURE_WEIGHTS_MAGIC = b"FEXT"
FORMAT_VERSION = 1
DIGEST_SIZE = 32

_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {code: dtype for dtype, code in _DTYPE_CODES.items()}

PathLike = Union[str, Path]


def write_container(
    path: PathLike,
    magic: bytes,
    arrays: Mapping[str, np.ndarray],
    metadata: Dict[str, Any],
) -> None:
    """Serialize arrays bit-exactly; the file is replaced atomically."""
    header = bytearray(magic)
    header += struct.pack("<I", FORMAT_VERSION)
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    header += struct.pack("<I", len(meta)) + meta
    header += struct.pack("<I", len(arrays))

    payload = bytearray()
    for name, array in arrays.items():
        array = np.asarray(array)
        dtype = array.dtype.newbyteorder("<")
        if dtype not in _DTYPE_CODES:
            raise ContainerError(f"entry '{name}' has unsupported dtype {array.dtype}")
        raw = np.ascontiguousarray(array, dtype=dtype).tobytes()
        encoded = name.encode("utf-8")
        header += struct.pack("<H", len(encoded)) + encoded
        header += struct.pack("<BI", _DTYPE_CODES[dtype], array.ndim)
        header += struct.pack(f"<{array.ndim}I", *array.shape)
        header += struct.pack("<QQ", len(payload), len(raw))
        payload += raw

    body = bytes(header) + bytes(payload)
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(body + hashlib.sha256(body).digest())
    tmp.replace(target)


def read_container(
    path: PathLike, magic: bytes
) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    """Parse and verify a container; nothing is returned unless every check passes."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ContainerError(f"cannot read {path}: {e}") from e
    if len(raw) < 4 + 4 + DIGEST_SIZE or raw[:4] != magic:
        raise ContainerError(f"{path}: expected magic {magic!r}, found {raw[:4]!r}")
    body, digest = raw[:-DIGEST_SIZE], raw[-DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch, file is corrupted")

    try:
        (version,) = struct.unpack_from("<I", body, 4)
        if version != FORMAT_VERSION:
            raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
        pos = 8
        (meta_len,) = struct.unpack_from("<I", body, pos)
        pos += 4
        metadata = json.loads(body[pos:pos + meta_len].decode("utf-8"))
        pos += meta_len
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        entries = []
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos:pos + name_len].decode("utf-8")
            pos += name_len
            code, rank = struct.unpack_from("<BI", body, pos)
            pos += 5
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            offset, nbytes = struct.unpack_from("<QQ", body, pos)
            pos += 16
            if code not in _CODE_DTYPES:
                raise ContainerError(f"{path}: entry '{name}' has unknown dtype code {code}")
            entries.append((name, _CODE_DTYPES[code], dims, offset, nbytes))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerError(f"{path}: malformed header: {e}") from e

    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, dtype, dims, offset, nbytes in entries:
        expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        start = pos + offset
        if nbytes != expected or start + nbytes > len(body):
            raise ContainerError(f"{path}: entry '{name}' payload is inconsistent with shape {dims}")
        arrays[name] = np.frombuffer(body, dtype=dtype, count=expected // dtype.itemsize, offset=start).reshape(dims).copy()
    logger.debug(f"Read {len(arrays)} arrays from {path}")
    return metadata, arrays
