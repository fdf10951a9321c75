"""
Layout Gradient Rules
Rules voor ops die alleen waarden verplaatsen: reshape, permute, concat, slice
"""

from typing import List, Optional

import numpy as np

from app.core.tape import TapeNode
from app.gradients.base import BaseGradRule


class ReshapeRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "reshape"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        return [grad.reshape(node.saved["in_shape"])]


class PermuteRule(BaseGradRule):
    """Inverse permutation of the recorded axes"""

    @property
    def op(self) -> str:
        return "permute"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        inverse = np.argsort(node.saved["axes"])
        return [grad.transpose(inverse)]


class ConcatRule(BaseGradRule):
    @property
    def op(self) -> str:
        return "concat"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        cuts = np.cumsum(node.saved["sizes"])[:-1]
        return list(np.split(grad, cuts, axis=node.saved["axis"]))


class SliceRule(BaseGradRule):
    """Scatter into a zero tensor of the input shape"""

    @property
    def op(self) -> str:
        return "slice"

    def backward(self, node: TapeNode, grad: np.ndarray) -> List[Optional[np.ndarray]]:
        out = np.zeros(node.saved["in_shape"])
        index = [slice(None)] * out.ndim
        index[node.saved["axis"]] = slice(node.saved["lo"], node.saved["hi"])
        out[tuple(index)] = grad
        return [out]
