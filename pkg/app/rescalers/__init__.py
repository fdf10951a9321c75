"""
Rescalers Module
Key/value pipelines per rescaling strategy
"""

from app.rescalers.base import BaseRescaler, KeyValue
from app.rescalers.embedding import dope, embed, pe
from app.rescalers.registry import RescalerRegistry, rescaler_registry
from app.rescalers.strategies import NoRescale, PostAvgPool, PostPe, PreDopePe

__all__ = [
    "BaseRescaler",
    "KeyValue",
    "dope",
    "embed",
    "pe",
    "NoRescale",
    "PostPe",
    "PostAvgPool",
    "PreDopePe",
    "RescalerRegistry",
    "rescaler_registry",
]
