"""
Attention Mechanisms
Global attention, local window attention and varying window attention
"""

from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import structlog
from pydantic import ValidationError

from app.config import settings
from app.core import ops
from app.core.counters import ATTENTION, LINEAR, record_activation
from app.core.tensor import Tensor, WindowSet
from app.errors import ConfigError, ShapeError
from app.models import AttnConfig, AttnWeights, LinearMap, PadMode, RescaleStrategy
from app.rescalers import dope, pe, rescaler_registry
from app.rescalers.base import MapShape
from app.windowing import partition_queries

logger = structlog.get_logger()

__all__ = [
    "make_config",
    "map_shapes",
    "uniform_map",
    "init_attn_weights",
    "init_lwa_weights",
    "identity_map",
    "vwa_weights_from_lwa",
    "with_zero_bias",
    "count_params",
    "ga_forward",
    "lwa_forward",
    "vwa_forward",
    "attention_probs",
    "dope",
    "pe",
]

LWA_MAPS = ("query", "key", "value", "out")


# ---------------------------------------------------------------------------
# Config & weights
# ---------------------------------------------------------------------------


def make_config(**fields) -> AttnConfig:
    """AttnConfig whose validation failures surface as ConfigError"""
    try:
        return AttnConfig(**fields)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def map_shapes(cfg: AttnConfig) -> Dict[str, MapShape]:
    """Every map the layer needs, as name -> (Cout, Cin, kernel)"""
    c = cfg.channels
    shapes: Dict[str, MapShape] = {"query": (c, c, 1)}
    shapes.update(rescaler_registry.get(cfg.strategy).map_shapes(cfg))
    shapes["out"] = (c, c, 1)
    return shapes


def uniform_map(rng: np.random.Generator, cout: int, cin: int, kernel: int) -> LinearMap:
    bound = 1.0 / np.sqrt(cin * kernel * kernel)
    weight = rng.uniform(-bound, bound, size=(cout, cin, kernel, kernel))
    bias = rng.uniform(-bound, bound, size=(cout,))
    return LinearMap(weight=Tensor.adopt(weight), bias=Tensor.adopt(bias))


def init_attn_weights(cfg: AttnConfig, seed: int = 0) -> AttnWeights:
    """
    Uniform init in [−1/√fan_in, +1/√fan_in] for every map of cfg

    Maps are drawn in map_shapes() order from one generator, so a seed
    fixes all of them.
    """
    rng = np.random.default_rng(seed)
    return AttnWeights(
        maps={name: uniform_map(rng, *shape) for name, shape in map_shapes(cfg).items()}
    )


def init_lwa_weights(channels: int, seed: int = 0) -> AttnWeights:
    """query/key/value/out maps, as used by ga_forward and lwa_forward"""
    cfg = make_config(channels=channels, window=1, heads=1, strategy=RescaleStrategy.NO_RESCALE)
    return init_attn_weights(cfg, seed)


def identity_map(channels: int) -> LinearMap:
    weight = np.eye(channels).reshape(channels, channels, 1, 1)
    return LinearMap(weight=Tensor.adopt(weight), bias=Tensor.zeros((channels,)))


def vwa_weights_from_lwa(w: AttnWeights) -> AttnWeights:
    """
    R=1 pre-scaling weights that reproduce an LWA layer

    DOPE becomes the identity and PE takes over LWA's key/value maps.
    """
    channels = w["query"].out_channels
    return AttnWeights(
        maps={
            "query": w["query"],
            "dope": identity_map(channels),
            "pe_key": w["key"],
            "pe_value": w["value"],
            "out": w["out"],
        }
    )


def with_zero_bias(w: AttnWeights, names: Iterable[str]) -> AttnWeights:
    zeroed = {
        name: LinearMap(weight=w[name].weight, bias=Tensor.zeros(w[name].bias.shape))
        for name in names
    }
    return w.replace(**zeroed)


def count_params(w: AttnWeights) -> int:
    """Weight-shape sum over every map"""
    return sum(lmap.param_count for lmap in w.maps.values())


def _check_weights(w: AttnWeights, shapes: Dict[str, MapShape]):
    for name, (cout, cin, kernel) in shapes.items():
        if name not in w:
            raise ConfigError(f"weights lack the '{name}' map")
        expected = (cout, cin, kernel, kernel)
        if w[name].weight.shape != expected:
            raise ShapeError(f"'{name}' weight must be {expected}, got {w[name].weight.shape}")


# ---------------------------------------------------------------------------
# Multi-head core
# ---------------------------------------------------------------------------


def _linear(x: Tensor, lmap: LinearMap) -> Tensor:
    return ops.conv2d(x, lmap.weight, lmap.bias)


def _split_heads(ws: WindowSet, heads: int) -> Tensor:
    n, h, w, channels = ws.windows.shape
    tokens = ops.reshape(ws.windows, (n, h * w, heads, channels // heads))
    stacked = ops.permute(tokens, (0, 2, 1, 3))
    return ops.reshape(stacked, (n * heads, h * w, channels // heads))


def _merge_heads(t: Tensor, like: WindowSet, heads: int) -> WindowSet:
    n = like.count
    tokens = t.shape[1]
    per_head = ops.reshape(t, (n, heads, tokens, t.shape[2]))
    merged = ops.permute(per_head, (0, 2, 1, 3))
    windows = ops.reshape(merged, (n, like.win_h, like.win_w, heads * t.shape[2]))
    return WindowSet(
        windows=windows, rows=like.rows, cols=like.cols, win_h=like.win_h, win_w=like.win_w, stride=like.stride
    )


def _attend(
    queries: WindowSet, keys: WindowSet, values: WindowSet, heads: int, softmax_scale: float
) -> Tuple[WindowSet, Tensor]:
    """
    Scaled dot-product attention per window and head

    Returns:
        (attended windows shaped like queries, probabilities (n·h, Lq, Lk))
    """
    if queries.count != keys.count:
        raise ShapeError(f"{queries.count} query windows vs {keys.count} key windows")
    q = _split_heads(queries, heads)
    k = _split_heads(keys, heads)
    v = _split_heads(values, heads)

    logits = ops.scale(ops.matmul(q, ops.permute(k, (0, 2, 1))), softmax_scale)
    probs = ops.softmax(logits, axis=-1)
    record_activation(ATTENTION, probs, groups=heads)

    attended = ops.matmul(probs, v)
    return _merge_heads(attended, queries, heads), probs


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def _check_input(x: Tensor, channels: int):
    if x.ndim != 3:
        raise ShapeError(f"expected a C×H×W feature map, got {x.shape}")
    if x.shape[0] != channels:
        raise ShapeError(f"input has {x.shape[0]} channels, config expects {channels}")


def _window_forward(x: Tensor, w: AttnWeights, cfg: AttnConfig) -> Tuple[Tensor, Tensor]:
    _check_input(x, cfg.channels)
    rescaler = rescaler_registry.get(cfg.strategy)
    _check_weights(w, map_shapes(cfg))

    query = _linear(x, w["query"])
    record_activation(LINEAR, query)
    queries = partition_queries(query, cfg.window)

    kv = rescaler.keys_values(x, w, cfg)
    attended, probs = _attend(queries, kv.key, kv.value, cfg.heads, cfg.softmax_scale)

    merged = ops.mosaic(attended)
    record_activation(LINEAR, merged)
    out = _linear(merged, w["out"])
    record_activation(LINEAR, out)
    return out, probs


def vwa_forward(x: Tensor, w: AttnWeights, cfg: AttnConfig) -> Tensor:
    """
    Varying window attention

    Queries stay on P×P windows; keys and values come from the RP×RP context
    centred on each, built by the rescaler registered for cfg.strategy.

    Raises:
        ConfigError: weights missing a map the strategy needs
        ShapeError: input or weight shapes disagree with cfg
        GeometryError: H/W not divisible by P, or R·P larger than the map under copy-shift
    """
    out, _ = _window_forward(x, w, cfg)
    return out


def attention_probs(x: Tensor, w: AttnWeights, cfg: AttnConfig) -> Tensor:
    """Softmax tensor of a VWA forward, (windows·heads) × P² × key-window²"""
    _, probs = _window_forward(x, w, cfg)
    return probs


def lwa_forward(x: Tensor, w: AttnWeights, window: int, heads: Optional[int] = None) -> Tensor:
    """Local window attention: VWA without rescaling at R=1"""
    cfg = make_config(
        channels=x.shape[0],
        window=window,
        ratio=1,
        heads=heads or settings.default_heads,
        pad_mode=PadMode.ZERO,
        strategy=RescaleStrategy.NO_RESCALE,
    )
    return vwa_forward(x, w, cfg)


def ga_forward(x: Tensor, w: AttnWeights, heads: Optional[int] = None) -> Tensor:
    """Multi-head self-attention over all H·W tokens (one H×W window)"""
    heads = heads or settings.default_heads
    channels = x.shape[0] if x.ndim == 3 else 0
    _check_input(x, channels)
    if channels % heads:
        raise ConfigError(f"channels {channels} not divisible by heads {heads}")
    _check_weights(w, {name: (channels, channels, 1) for name in LWA_MAPS})
    _, height, width = x.shape

    query = _linear(x, w["query"])
    record_activation(LINEAR, query)
    record_activation(LINEAR, x)
    key = _linear(x, w["key"])
    value = _linear(x, w["value"])

    whole = (height, width)
    attended, _ = _attend(
        ops.unfold(query, whole, 1),
        ops.unfold(key, whole, 1),
        ops.unfold(value, whole, 1),
        heads,
        1.0 / np.sqrt(channels // heads),
    )
    merged = ops.mosaic(attended)
    record_activation(LINEAR, merged)
    out = _linear(merged, w["out"])
    record_activation(LINEAR, out)
    return out
