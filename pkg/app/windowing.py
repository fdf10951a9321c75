"""
Windowing
Query partitioning, context extraction and the two border padding modes
"""

from typing import Optional, Tuple

import numpy as np

from app.core import ops
from app.core.tensor import Tensor, WindowSet
from app.errors import GeometryError, ShapeError
from app.models import PadMode, PadSpec

HEIGHT_AXIS = 1
WIDTH_AXIS = 2


def _spatial(x: Tensor) -> Tuple[int, int, int]:
    if x.ndim != 3:
        raise ShapeError(f"expected a C×H×W feature map, got {x.shape}")
    return x.shape[0], x.shape[1], x.shape[2]


def _check_parity(window: int, ratio: int):
    if ratio > 1 and window % 2:
        raise GeometryError(f"window P={window} must be even for R={ratio}; (R+1)·P/2 is not integral")


def margin(window: int, ratio: int) -> int:
    """Per-side margin (R−1)·P/2, i.e. RP − (R+1)·P/2"""
    return (ratio - 1) * window // 2


def partition_queries(x: Tensor, window: int) -> WindowSet:
    """Non-overlapping P×P query windows, (H/P)·(W/P) of them"""
    _, height, width = _spatial(x)
    for name, dim in (("height", height), ("width", width)):
        if dim % window:
            raise GeometryError(f"{name} {dim} not divisible by window P={window}")
    return ops.unfold(x, window, window)


def csp_pad(x: Tensor, window: int, ratio: int) -> Tensor:
    """
    Copy-shift padding

    Width first: the left margin is x[..., (R+1)P/2 : RP] and the right margin
    x[..., W−RP : W−(R+1)P/2]. Height second, with the same slices taken from
    the width-padded tensor, so corners are copies of copies.
    """
    if ratio == 1:
        return x
    _check_parity(window, ratio)
    _, height, width = _spatial(x)
    span = ratio * window
    for name, dim in (("height", height), ("width", width)):
        if span > dim:
            raise GeometryError(f"copy-shift needs R·P={span} <= {name} {dim}")

    inner = (ratio + 1) * window // 2
    padded = x
    for axis, dim in ((WIDTH_AXIS, width), (HEIGHT_AXIS, height)):
        before = ops.slice_axis(padded, axis, inner, span)
        after = ops.slice_axis(padded, axis, dim - span, dim - inner)
        padded = ops.concat([before, padded, after], axis=axis)
    return padded


def zero_margin(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Surround x with explicit zero rows/columns (built with concat)"""
    channels, height, width = _spatial(x)
    padded = x
    if left or right:
        parts = []
        if left:
            parts.append(Tensor.zeros((channels, height, left)))
        parts.append(padded)
        if right:
            parts.append(Tensor.zeros((channels, height, right)))
        padded = ops.concat(parts, axis=WIDTH_AXIS)
    if top or bottom:
        full_width = width + left + right
        parts = []
        if top:
            parts.append(Tensor.zeros((channels, top, full_width)))
        parts.append(padded)
        if bottom:
            parts.append(Tensor.zeros((channels, bottom, full_width)))
        padded = ops.concat(parts, axis=HEIGHT_AXIS)
    return padded


def zero_pad(x: Tensor, window: int, ratio: int) -> Tensor:
    """Zero margins of (R−1)·P/2 on every side; same geometry as csp_pad"""
    if ratio == 1:
        return x
    _check_parity(window, ratio)
    m = margin(window, ratio)
    return zero_margin(x, m, m, m, m)


def pad(x: Tensor, spec: PadSpec) -> Tensor:
    if spec.mode == PadMode.COPY_SHIFT:
        return csp_pad(x, spec.window, spec.ratio)
    return zero_pad(x, spec.window, spec.ratio)


def extract_contexts(
    padded: Tensor, window: int, ratio: int, query_grid: Optional[Tuple[int, int]] = None
) -> WindowSet:
    """
    RP×RP context windows with stride P

    Window (i, j) is centred on query window (i, j) when padded came from
    csp_pad/zero_pad with the same (P, R).

    Args:
        query_grid: (rows, cols) of the matching query partition; checked when given
    """
    contexts = ops.unfold(padded, ratio * window, window)
    if query_grid is not None and (contexts.rows, contexts.cols) != tuple(query_grid):
        raise GeometryError(
            f"context grid {contexts.rows}×{contexts.cols} does not match query grid "
            f"{query_grid[0]}×{query_grid[1]}; was the input padded for P={window}, R={ratio}?"
        )
    return contexts


def pad_source_map(size: int, spec: PadSpec) -> np.ndarray:
    """
    Source index of every padded coordinate along one axis

    Entry t is the unpadded index the padded position t copies, or -1 for a
    zero margin. Applies to rows and columns alike; corners compose.
    """
    m = spec.margin
    index = np.full(size + 2 * m, -1, dtype=np.int64)
    index[m : m + size] = np.arange(size)
    if m and spec.mode == PadMode.COPY_SHIFT:
        span = spec.ratio * spec.window
        inner = (spec.ratio + 1) * spec.window // 2
        index[:m] = np.arange(inner, span)
        index[m + size :] = np.arange(size - span, size - inner)
    return index
