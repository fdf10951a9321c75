"""
Elementwise Gradient Rules
Rules voor add, mul, scale, sum en softmax
"""

from typing import List, Optional

import numpy as np

from app.core.tape import TapeNode
from app.gradients.base import BaseGradRule


class AddRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "add"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        return [grad, grad]


class MulRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "mul"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        a, b = node.input_values
        return [grad * b, grad * a]


class ScaleRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "scale"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        return [grad * node.saved["factor"]]


class SumRule(BaseGradRule):
    """Broadcast the scalar gradient over the input"""

    @property
    def op(self) -> str:
        return "sum"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        return [np.full(node.saved["in_shape"], grad.reshape(-1)[0])]


class SoftmaxRule(BaseGradRule):
    """
    Softmax VJP

    With y = softmax(x): dx = y · (g − Σ g·y) along the softmax axis.
    Uses the recorded output, not the input.
    """

    @property
    def op(self) -> str:
        return "softmax"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        y = node.value.data
        axis = node.saved["axis"]
        inner = (grad * y).sum(axis=axis, keepdims=True)
        return [y * (grad - inner)]
