"""
Patch Embeddings
DOPE (stride-1 channel reduction) and PE (stride-R window downsampling)
"""

from app.core import ops
from app.core.tensor import Tensor, WindowSet
from app.errors import ConfigError, GeometryError, ShapeError
from app.models import LinearMap
from app.windowing import zero_margin


def dope(x: Tensor, w: LinearMap, ratio: int) -> Tensor:
    """
    Densely overlapping patch embedding: C×H×W -> (C/R²)×H×W

    A kernel-R, stride-1 conv. The input gets zero margins (R−1)//2 on the
    top/left and R//2 on the bottom/right first, so the output keeps the
    input's spatial size and costs exactly (HW)·C² MACs.
    """
    channels = x.shape[0]
    if channels % (ratio * ratio):
        raise ConfigError(f"channels {channels} not divisible by R²={ratio * ratio}")
    expected = (channels // (ratio * ratio), channels, ratio, ratio)
    if w.weight.shape != expected:
        raise ShapeError(f"DOPE weight must be {expected}, got {w.weight.shape}")

    before, after = (ratio - 1) // 2, ratio // 2
    framed = zero_margin(x, before, after, before, after)
    return ops.conv2d(framed, w.weight, w.bias, stride=1)


def embed(contexts: WindowSet, w: LinearMap, stride: int) -> WindowSet:
    """
    Apply a kernel=stride conv to every window independently

    The windows are laid side by side and convolved once; a window side
    divisible by the stride keeps the kernel from straddling two windows.
    """
    if contexts.win_h != contexts.win_w or contexts.win_h % stride:
        raise GeometryError(
            f"window {contexts.win_h}×{contexts.win_w} is not a square multiple of stride {stride}"
        )
    if w.kernel != stride:
        raise ShapeError(f"embedding kernel {w.kernel} must equal its stride {stride}")
    canvas = ops.mosaic(contexts)
    embedded = ops.conv2d(canvas, w.weight, w.bias, stride=stride)
    side = contexts.win_h // stride
    return ops.unfold(embedded, side, side)


def pe(contexts: WindowSet, w: LinearMap, ratio: int) -> WindowSet:
    """Patch embedding: (C/R²)×RP×RP contexts -> C×P×P windows"""
    return embed(contexts, w, ratio)
