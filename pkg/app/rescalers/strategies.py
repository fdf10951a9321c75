"""
Rescaling Strategies
De vier manieren om een RP×RP context terug te brengen naar de query-grootte
"""

from typing import Dict

from app.core import ops
from app.core.tensor import Tensor
from app.models import AttnConfig, AttnWeights, RescaleStrategy
from app.rescalers.base import BaseRescaler, KeyValue, MapShape
from app.rescalers.embedding import dope, embed, pe
from app.windowing import extract_contexts, pad


def _contexts(x: Tensor, cfg: AttnConfig):
    rows, cols = x.shape[1] // cfg.window, x.shape[2] // cfg.window
    padded = pad(x, cfg.pad_spec)
    return extract_contexts(padded, cfg.window, cfg.ratio, query_grid=(rows, cols))


class NoRescale(BaseRescaler):
    """
    Handler voor de naive VWA

    Key/value maps run on every pixel of every RP×RP context; attention is
    P² × (RP)². With R=1 this is exactly local window attention.
    """

    @property
    def strategy(self) -> RescaleStrategy:
        return RescaleStrategy.NO_RESCALE

    @property
    def key_map(self) -> str:
        return "key"

    def map_shapes(self, cfg: AttnConfig) -> Dict[str, MapShape]:
        c = cfg.channels
        return {"key": (c, c, 1), "value": (c, c, 1)}

    def keys_values(self, x: Tensor, w: AttnWeights, cfg: AttnConfig) -> KeyValue:
        context = _contexts(x, cfg)
        self.record_context(context)
        return KeyValue(
            key=embed(context, w["key"], 1),
            value=embed(context, w["value"], 1),
            context=context,
        )


class PostPe(BaseRescaler):
    """Contexts extracted at full width, then embedded C -> C with a stride-R patch embedding"""

    @property
    def strategy(self) -> RescaleStrategy:
        return RescaleStrategy.POST_PE

    @property
    def key_map(self) -> str:
        return "pe_key"

    def map_shapes(self, cfg: AttnConfig) -> Dict[str, MapShape]:
        c, r = cfg.channels, cfg.ratio
        return {"pe_key": (c, c, r), "pe_value": (c, c, r)}

    def keys_values(self, x: Tensor, w: AttnWeights, cfg: AttnConfig) -> KeyValue:
        context = _contexts(x, cfg)
        self.record_context(context)
        return KeyValue(
            key=pe(context, w["pe_key"], cfg.ratio),
            value=pe(context, w["pe_value"], cfg.ratio),
            context=context,
        )


class PostAvgPool(BaseRescaler):
    """Contexts average-pooled R× after extraction, then the usual 1×1 key/value maps"""

    @property
    def strategy(self) -> RescaleStrategy:
        return RescaleStrategy.POST_AVG_POOL

    @property
    def key_map(self) -> str:
        return "key"

    def map_shapes(self, cfg: AttnConfig) -> Dict[str, MapShape]:
        c = cfg.channels
        return {"key": (c, c, 1), "value": (c, c, 1)}

    def keys_values(self, x: Tensor, w: AttnWeights, cfg: AttnConfig) -> KeyValue:
        context = _contexts(x, cfg)
        self.record_context(context)
        pooled = ops.unfold(ops.avg_pool2d(ops.mosaic(context), cfg.ratio), cfg.window, cfg.window)
        return KeyValue(
            key=embed(pooled, w["key"], 1),
            value=embed(pooled, w["value"], 1),
            context=context,
        )


class PreDopePe(BaseRescaler):
    """
    Handler voor de pre-scaling pipeline

    DOPE shrinks the feature to C/R² channels before any context exists, the
    reduced feature is padded and unfolded, and PE (used twice, once for the
    key and once for the value) brings every context back to P×P×C. The
    materialized context is as large as the LWA one.
    """

    @property
    def strategy(self) -> RescaleStrategy:
        return RescaleStrategy.PRE_DOPE_PE

    @property
    def key_map(self) -> str:
        return "pe_key"

    def map_shapes(self, cfg: AttnConfig) -> Dict[str, MapShape]:
        c, r, reduced = cfg.channels, cfg.ratio, cfg.reduced_channels
        return {
            "dope": (reduced, c, r),
            "pe_key": (c, reduced, r),
            "pe_value": (c, reduced, r),
        }

    def keys_values(self, x: Tensor, w: AttnWeights, cfg: AttnConfig) -> KeyValue:
        reduced = dope(x, w["dope"], cfg.ratio)
        context = _contexts(reduced, cfg)
        self.record_context(context)
        return KeyValue(
            key=pe(context, w["pe_key"], cfg.ratio),
            value=pe(context, w["pe_value"], cfg.ratio),
            context=context,
        )
