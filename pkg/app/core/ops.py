"""
Tensor Ops
Pure functions over Tensor; every op records itself on the active tape
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.counters import ATTENTION, LINEAR, record_macs
from app.core.tape import record
from app.core.tensor import Tensor, WindowSet
from app.errors import BoundsError, GeometryError, ShapeError, UnsupportedError

Size2 = Union[int, Tuple[int, int]]


def _pair(value: Size2) -> Tuple[int, int]:
    if isinstance(value, int):
        return value, value
    return int(value[0]), int(value[1])


def _axis(x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise BoundsError(f"axis {axis} out of range for rank {x.ndim}")
    return axis % x.ndim


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(d) for d in shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} into {shape}")
    return record("reshape", x.data.reshape(shape), [x], in_shape=x.shape)


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"axes {axes} are not a permutation of rank {x.ndim}")
    return record("permute", np.ascontiguousarray(x.data.transpose(axes)), [x], axes=axes)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Join tensors along axis; all other dims must agree"""
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    first = tensors[0]
    axis = _axis(first, axis)
    for t in tensors[1:]:
        if t.ndim != first.ndim or any(
            a != b for i, (a, b) in enumerate(zip(t.shape, first.shape)) if i != axis
        ):
            raise ShapeError(f"concat shape mismatch: {t.shape} vs {first.shape} on axis {axis}")
    if len(tensors) == 1:
        return first
    sizes = tuple(t.shape[axis] for t in tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return record("concat", out, list(tensors), axis=axis, sizes=sizes)


def slice_axis(x: Tensor, axis: int, lo: int, hi: int) -> Tensor:
    """x[..., lo:hi, ...] along axis, with 0 <= lo < hi <= dim"""
    axis = _axis(x, axis)
    dim = x.shape[axis]
    if not 0 <= lo < hi <= dim:
        raise BoundsError(f"slice [{lo}, {hi}) outside axis {axis} of size {dim}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(lo, hi)
    out = np.ascontiguousarray(x.data[tuple(index)])
    return record("slice", out, [x], axis=axis, lo=lo, hi=hi, in_shape=x.shape)


# ---------------------------------------------------------------------------
# elementwise / reductions
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return record("add", a.data + b.data, [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul needs equal shapes, got {a.shape} and {b.shape}")
    return record("mul", a.data * b.data, [a, b])


def scale(x: Tensor, factor: float) -> Tensor:
    return record("scale", x.data * float(factor), [x], factor=float(factor))


def sum_all(x: Tensor) -> Tensor:
    """Sum of every element, shape (1,)"""
    return record("sum", np.array([x.data.sum()]), [x], in_shape=x.shape)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along axis, computed with max-subtraction"""
    axis = _axis(x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)
    return record("softmax", out, [x], axis=axis)


# ---------------------------------------------------------------------------
# products
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Batched matrix product …×m×k · …×k×n

    Leading batch dims must be equal (no broadcasting). Records batch·m·n·k
    attention MACs: the only matmuls in the package are QKᵀ and AV.
    """
    if a.ndim < 2 or a.ndim != b.ndim:
        raise ShapeError(f"matmul needs equal ranks >= 2, got {a.shape} and {b.shape}")
    if a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul batch dims differ: {a.shape[:-2]} vs {b.shape[:-2]}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} · {b.shape}")
    batch = int(np.prod(a.shape[:-2])) if a.ndim > 2 else 1
    m, k = a.shape[-2:]
    n = b.shape[-1]
    record_macs(ATTENTION, batch * m * n * k)
    return record("matmul", np.matmul(a.data, b.data), [a, b])


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1) -> Tensor:
    """
    Cross-correlation of Cin×H×W with Cout×Cin×kh×kw, no implicit padding

    The bias is the one broadcast in the op set: it is added per output
    channel. Records H'·W'·kh·kw·Cin·Cout linear MACs.
    """
    if x.ndim != 3 or weight.ndim != 4:
        raise ShapeError(f"conv2d needs Cin×H×W and Cout×Cin×k×k, got {x.shape}, {weight.shape}")
    cin, height, width = x.shape
    cout, wcin, kh, kw = weight.shape
    if wcin != cin:
        raise ShapeError(f"conv2d weight expects {wcin} input channels, input has {cin}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d bias shape {bias.shape} does not match Cout={cout}")
    if stride < 1:
        raise GeometryError(f"stride must be >= 1, got {stride}")
    for name, dim, k in (("height", height, kh), ("width", width, kw)):
        if dim < k or (dim - k) % stride:
            raise GeometryError(f"conv2d {name}: ({dim} - {k}) not divisible by stride {stride}")

    out_h = (height - kh) // stride + 1
    out_w = (width - kw) // stride + 1
    out = np.zeros((cout, out_h, out_w))
    for a in range(kh):
        for b in range(kw):
            patch = x.data[:, a : a + stride * (out_h - 1) + 1 : stride, b : b + stride * (out_w - 1) + 1 : stride]
            out += np.tensordot(weight.data[:, :, a, b], patch, axes=(1, 0))
    if bias is not None:
        out += bias.data[:, None, None]

    record_macs(LINEAR, out_h * out_w * kh * kw * cin * cout)
    return record("conv2d", out, [x, weight, bias], stride=stride)


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


def unfold(x: Tensor, kernel: Size2, stride: int, padding: int = 0) -> WindowSet:
    """
    Sliding windows of a C×H×W map

    Args:
        kernel: window size (square int or (kh, kw))
        stride: step between windows
        padding: explicit zero margin added on every side first

    Returns:
        WindowSet with windows (rows·cols, kh, kw, C); window (i, j) is
        x_padded[:, i·s : i·s+kh, j·s : j·s+kw]
    """
    if x.ndim != 3:
        raise ShapeError(f"unfold needs C×H×W, got {x.shape}")
    kh, kw = _pair(kernel)
    if stride < 1 or kh < 1 or kw < 1 or padding < 0:
        raise GeometryError(f"invalid unfold geometry kernel={kernel} stride={stride} padding={padding}")
    channels = x.shape[0]
    height, width = x.shape[1] + 2 * padding, x.shape[2] + 2 * padding
    for name, dim, k in (("height", height, kh), ("width", width, kw)):
        if dim < k or (dim - k) % stride:
            raise GeometryError(f"unfold {name}: ({dim} - {k}) not divisible by stride {stride}")
    rows = (height - kh) // stride + 1
    cols = (width - kw) // stride + 1

    source = x.data
    if padding:
        source = np.pad(source, ((0, 0), (padding, padding), (padding, padding)))
    views = sliding_window_view(source, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    windows = np.ascontiguousarray(views.transpose(1, 2, 3, 4, 0)).reshape(rows * cols, kh, kw, channels)

    tensor = record(
        "unfold",
        windows,
        [x],
        kernel=(kh, kw),
        stride=stride,
        padding=padding,
        grid=(rows, cols),
        in_shape=x.shape,
    )
    return WindowSet(windows=tensor, rows=rows, cols=cols, win_h=kh, win_w=kw, stride=stride)


def mosaic(ws: WindowSet) -> Tensor:
    """
    Lay the windows side by side: C × rows·win_h × cols·win_w

    For stride == kernel this re-assembles the map unfold() came from.
    """
    grid = reshape(ws.windows, (ws.rows, ws.cols, ws.win_h, ws.win_w, ws.channels))
    image = permute(grid, (4, 0, 2, 1, 3))
    return reshape(image, (ws.channels, ws.rows * ws.win_h, ws.cols * ws.win_w))


def avg_pool2d(x: Tensor, kernel: int) -> Tensor:
    """Mean over non-overlapping kernel×kernel blocks (stride == kernel)"""
    if x.ndim != 3:
        raise ShapeError(f"avg_pool2d needs C×H×W, got {x.shape}")
    channels, height, width = x.shape
    for name, dim in (("height", height), ("width", width)):
        if dim % kernel:
            raise GeometryError(f"avg_pool2d {name} {dim} not divisible by kernel {kernel}")
    blocks = x.data.reshape(channels, height // kernel, kernel, width // kernel, kernel)
    return record("avg_pool2d", blocks.mean(axis=(2, 4)), [x], kernel=kernel)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------


def interpolation_matrix(in_size: int, out_size: int) -> np.ndarray:
    """
    Linear interpolation weights (out_size × in_size), half-pixel centers

    Source coordinate of output i is (i + 0.5)·in/out - 0.5, clamped at 0
    (align-corners = false).
    """
    matrix = np.zeros((out_size, in_size))
    ratio = in_size / out_size
    for i in range(out_size):
        src = max((i + 0.5) * ratio - 0.5, 0.0)
        lo = min(int(np.floor(src)), in_size - 1)
        hi = min(lo + 1, in_size - 1)
        frac = src - lo
        matrix[i, lo] += 1.0 - frac
        matrix[i, hi] += frac
    return matrix


def bilinear_upsample(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Upsample C×h×w to C×out_h×out_w (downsampling is not supported)"""
    if x.ndim != 3:
        raise ShapeError(f"bilinear_upsample needs C×h×w, got {x.shape}")
    _, height, width = x.shape
    if out_h < height or out_w < width:
        raise UnsupportedError(
            f"bilinear_upsample only enlarges: {height}×{width} -> {out_h}×{out_w}"
        )
    rows = interpolation_matrix(height, out_h)
    cols = interpolation_matrix(width, out_w)
    out = np.einsum("oh,chw,pw->cop", rows, x.data, cols)
    return record("bilinear_upsample", out, [x], rows=rows, cols=cols)
