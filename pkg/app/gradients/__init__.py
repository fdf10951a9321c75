"""
Gradient Rules Module
Export alle rules voor gemakkelijke import
"""

from app.gradients.elementwise import AddRule, MulRule, ScaleRule, SoftmaxRule, SumRule
from app.gradients.layout import ConcatRule, PermuteRule, ReshapeRule, SliceRule
from app.gradients.linear import Conv2dRule, MatmulRule
from app.gradients.spatial import AvgPool2dRule, BilinearUpsampleRule, UnfoldRule

__all__ = [
    "AddRule",
    "MulRule",
    "ScaleRule",
    "SumRule",
    "SoftmaxRule",
    "ReshapeRule",
    "PermuteRule",
    "ConcatRule",
    "SliceRule",
    "MatmulRule",
    "Conv2dRule",
    "UnfoldRule",
    "AvgPool2dRule",
    "BilinearUpsampleRule",
]
