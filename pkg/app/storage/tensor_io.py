"""
Binary Tensor Files
"VWT1" magic, u32 rank, rank × u64 dims, little-endian f64 payload (row-major)
"""

from pathlib import Path
from typing import Union

import numpy as np

from app.core.tensor import Tensor
from app.errors import FormatError

MAGIC = b"VWT1"
_RANK = np.dtype("<u4")
_DIM = np.dtype("<u8")
_VALUE = np.dtype("<f8")


def encode_tensor(tensor: Tensor) -> bytes:
    header = MAGIC + np.array([tensor.ndim], dtype=_RANK).tobytes()
    dims = np.array(tensor.shape, dtype=_DIM).tobytes()
    payload = np.ascontiguousarray(tensor.data, dtype=_VALUE).tobytes()
    return header + dims + payload


def decode_tensor(blob: bytes) -> Tensor:
    """
    Parse a VWT1 blob

    Raises:
        FormatError: wrong magic, truncated header or payload size mismatch
    """
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 8:
        raise FormatError("truncated header: rank missing")
    rank = int(np.frombuffer(blob, dtype=_RANK, count=1, offset=4)[0])
    dims_end = 8 + rank * _DIM.itemsize
    if len(blob) < dims_end:
        raise FormatError(f"truncated header: {rank} dims announced")
    shape = tuple(int(d) for d in np.frombuffer(blob, dtype=_DIM, count=rank, offset=8))

    count = int(np.prod(shape, dtype=np.int64))
    expected = dims_end + count * _VALUE.itemsize
    if len(blob) != expected:
        raise FormatError(f"payload holds {len(blob) - dims_end} bytes, shape {shape} needs {count * 8}")
    values = np.frombuffer(blob, dtype=_VALUE, count=count, offset=dims_end)
    return Tensor.adopt(values.astype(np.float64).reshape(shape))


def write_tensor(path: Union[str, Path], tensor: Tensor) -> Path:
    path = Path(path)
    path.write_bytes(encode_tensor(tensor))
    return path


def read_tensor(path: Union[str, Path]) -> Tensor:
    return decode_tensor(Path(path).read_bytes())


def read_shape(path: Union[str, Path]) -> tuple:
    """Shape from the header alone"""
    with open(path, "rb") as f:
        head = f.read(8)
        if head[:4] != MAGIC or len(head) < 8:
            raise FormatError(f"{path} is not a VWT1 file")
        rank = int(np.frombuffer(head, dtype=_RANK, count=1, offset=4)[0])
        dims = f.read(rank * _DIM.itemsize)
    if len(dims) != rank * _DIM.itemsize:
        raise FormatError(f"{path}: truncated header")
    return tuple(int(d) for d in np.frombuffer(dims, dtype=_DIM))
