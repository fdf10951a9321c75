"""
Spatial Gradient Rules
Rules voor unfold, avg_pool2d en bilinear_upsample
"""

from typing import List, Optional

import numpy as np

from app.core.tape import TapeNode
from app.gradients.base import BaseGradRule


class UnfoldRule(BaseGradRule):
    """
    Unfold VJP (col2im)

    Scatter-adds every window position back onto the padded source, then
    crops the explicit margin. Overlapping windows accumulate.
    """

    @property
    def op(self) -> str:
        return "unfold"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        kh, kw = node.saved["kernel"]
        rows, cols = node.saved["grid"]
        stride = node.saved["stride"]
        padding = node.saved["padding"]
        channels, height, width = node.saved["in_shape"]

        grid = grad.reshape(rows, cols, kh, kw, channels)
        padded = np.zeros((channels, height + 2 * padding, width + 2 * padding))
        for a in range(kh):
            for b in range(kw):
                target = (
                    slice(None),
                    slice(a, a + stride * (rows - 1) + 1, stride),
                    slice(b, b + stride * (cols - 1) + 1, stride),
                )
                padded[target] += grid[:, :, a, b, :].transpose(2, 0, 1)

        if padding:
            padded = padded[:, padding:-padding, padding:-padding]
        return [padded]


class AvgPool2dRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "avg_pool2d"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        k = node.saved["kernel"]
        spread = np.repeat(np.repeat(grad, k, axis=1), k, axis=2)
        return [spread / (k * k)]


class BilinearUpsampleRule(BaseGradRule):
    """Transpose of the two interpolation matrices"""

    @property
    def op(self) -> str:
        return "bilinear_upsample"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        rows, cols = node.saved["rows"], node.saved["cols"]
        return [np.einsum("oh,cop,pw->chw", rows, grad, cols)]
