"""
Linear Gradient Rules
Rules voor matmul en conv2d (de ops die MACs tellen)
"""

from typing import List, Optional

import numpy as np

from app.core.tape import TapeNode
from app.gradients.base import BaseGradRule


class MatmulRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "matmul"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        a, b = node.input_values
        grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
        grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
        return [grad_a, grad_b]


class Conv2dRule(BaseGradRule):
    """
    Conv2d VJP

    Mirrors the forward loop over kernel offsets: every offset (a, b) pairs one
    strided input view with one Cout×Cin weight slice.
    """

    @property
    def op(self) -> str:
        return "conv2d"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        x, weight, bias = node.input_values
        stride = node.saved["stride"]
        _, _, kh, kw = weight.shape
        _, out_h, out_w = grad.shape

        grad_x = np.zeros_like(x)
        grad_w = np.zeros_like(weight)
        for a in range(kh):
            for b in range(kw):
                rows = slice(a, a + stride * (out_h - 1) + 1, stride)
                cols = slice(b, b + stride * (out_w - 1) + 1, stride)
                grad_x[:, rows, cols] += np.tensordot(weight[:, :, a, b], grad, axes=(0, 0))
                grad_w[:, :, a, b] = np.tensordot(grad, x[:, rows, cols], axes=((1, 2), (1, 2)))

        grad_bias = grad.sum(axis=(1, 2)) if bias is not None else None
        return [grad_x, grad_w, grad_bias]
