"""
Tensor Values
Immutable float64 arrays with shape metadata, plus the WindowSet layout
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Tuple

import numpy as np

from app.errors import GeometryError, ShapeError

if TYPE_CHECKING:
    from app.core.tape import TapeNode


class Tensor:
    """
    Dense Tensor

    Row-major float64 data behind a read-only numpy array. A tensor produced
    while a Tape is active carries the TapeNode that created it.
    """

    __slots__ = ("_data", "node", "__weakref__")

    def __init__(self, data, node: Optional["TapeNode"] = None):
        array = np.array(data, dtype=np.float64, copy=True)
        self._data = _freeze(array)
        self.node = node

    @classmethod
    def adopt(cls, array: np.ndarray, node: Optional["TapeNode"] = None) -> "Tensor":
        """Wrap a freshly computed array without copying it"""
        tensor = cls.__new__(cls)
        tensor._data = _freeze(np.asarray(array, dtype=np.float64))
        tensor.node = node
        return tensor

    # ------------------------------------------------------------------ factories

    @classmethod
    def from_flat(cls, shape: Sequence[int], values: Iterable[float]) -> "Tensor":
        flat = np.fromiter(values, dtype=np.float64)
        if int(np.prod(shape)) != flat.size:
            raise ShapeError(f"{flat.size} values do not fill shape {tuple(shape)}")
        return cls.adopt(flat.reshape(tuple(shape)))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "Tensor":
        return cls.adopt(np.zeros(tuple(shape)))

    @classmethod
    def ones(cls, shape: Sequence[int]) -> "Tensor":
        return cls.adopt(np.ones(tuple(shape)))

    @classmethod
    def full(cls, shape: Sequence[int], value: float) -> "Tensor":
        return cls.adopt(np.full(tuple(shape), float(value)))

    @classmethod
    def random_normal(cls, shape: Sequence[int], rng: np.random.Generator) -> "Tensor":
        return cls.adopt(rng.standard_normal(tuple(shape)))

    # ------------------------------------------------------------------ accessors

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the values"""
        return self._data

    @property
    def flat(self) -> np.ndarray:
        return self._data.reshape(-1)

    @property
    def tracked(self) -> bool:
        return self.node is not None

    def numpy(self) -> np.ndarray:
        """Writable copy"""
        return self._data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, shape is {self.shape}")
        return float(self._data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor.adopt(self._data)

    def __repr__(self) -> str:
        tag = f", op={self.node.op}" if self.node is not None else ""
        return f"Tensor(shape={self.shape}{tag})"


def _freeze(array: np.ndarray) -> np.ndarray:
    if array.ndim == 0:
        array = array.reshape(1)
    if any(dim < 1 for dim in array.shape):
        raise ShapeError(f"all dimension sizes must be >= 1, got {array.shape}")
    if array.flags.writeable:
        array.setflags(write=False)
    return array


@dataclass(frozen=True)
class WindowSet:
    """
    Window Set

    windows: (rows·cols, win_h, win_w, channels), in row-major grid order
    """

    windows: Tensor
    rows: int
    cols: int
    win_h: int
    win_w: int
    stride: int

    def __post_init__(self):
        if self.win_h < 1 or self.win_w < 1 or self.stride < 1:
            raise GeometryError(
                f"window {self.win_h}×{self.win_w} / stride {self.stride} must be >= 1"
            )
        expected = (self.rows * self.cols, self.win_h, self.win_w)
        if self.windows.ndim != 4 or self.windows.shape[:3] != expected:
            raise ShapeError(f"windows shape {self.windows.shape} does not match grid {expected}")

    @property
    def count(self) -> int:
        return self.rows * self.cols

    @property
    def channels(self) -> int:
        return self.windows.shape[3]

    @property
    def element_count(self) -> int:
        return self.windows.size

    def window(self, row: int, col: int) -> np.ndarray:
        """Window (row, col) as a C×win_h×win_w array"""
        return self.windows.data[row * self.cols + col].transpose(2, 0, 1)
