"""
Receptive Field & Attention Analysis
ERF maps via input gradients, theoretical receptive regions, attention dumps and collapse metrics
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from app.attention import (
    attention_probs,
    ga_forward,
    init_attn_weights,
    init_lwa_weights,
    lwa_forward,
    make_config,
    vwa_forward,
    with_zero_bias,
)
from app.autodiff import backward, finite_diff
from app.config import settings
from app.core import ops
from app.core.tape import Tape
from app.core.tensor import Tensor
from app.errors import BoundsError, ConfigError, ContractError
from app.models import (
    AttentionRow,
    AttnConfig,
    AttnSection,
    AttnWeights,
    CollapseMetric,
    ErfMap,
    RescaleStrategy,
    VWFormerConfig,
)
from app.rescalers import rescaler_registry
from app.vwformer import blob_pattern, init_decoder_weights, multi_scale
from app.windowing import extract_contexts, pad_source_map, zero_pad

logger = structlog.get_logger()

Model = Callable[[Tensor], Tensor]
Sampler = Callable[[int], Tensor]
Position = Tuple[int, int]


# ---------------------------------------------------------------------------
# ERF
# ---------------------------------------------------------------------------


def _check_query(query: Position, height: int, width: int):
    i, j = query
    if not (0 <= i < height and 0 <= j < width):
        raise BoundsError(f"query {query} outside the {height}×{width} map")


def _query_scalar(out: Tensor, query: Position) -> Tensor:
    """Sum over output channels at one pixel, as a (1,) tensor"""
    i, j = query
    _check_query(query, out.shape[1], out.shape[2])
    pixel = ops.slice_axis(ops.slice_axis(out, 1, i, i + 1), 2, j, j + 1)
    return ops.sum_all(pixel)


def input_gradient(model: Model, x: Tensor, query: Position) -> np.ndarray:
    """|d(channel-sum at query)/dx| summed over input channels, H×W"""
    with Tape() as tape:
        watched = tape.watch(x)
        scalar = _query_scalar(model(watched), query)
        grad = backward(scalar)[watched]
    return np.abs(grad.data).sum(axis=0)


def _normalized(total: np.ndarray) -> Tensor:
    peak = total.max()
    grid = total / peak if peak > 0 else total
    return Tensor.adopt(grid[None])


def erf_map(
    model: Model,
    input_shape: Sequence[int],
    query: Position,
    n_samples: Optional[int] = None,
    seed: int = 0,
    sampler: Optional[Sampler] = None,
    max_workers: Optional[int] = None,
) -> ErfMap:
    """
    Effective receptive field of one output pixel

    Every sample owns its tape and runs on the thread pool; the per-sample
    maps are summed in sample order, averaged and scaled so the peak is 1.

    Args:
        input_shape: C×H×W of the model input
        sampler: sample index -> input; default draws a standard normal per sample

    Raises:
        BoundsError: query outside the map
    """
    n_samples = n_samples or settings.erf_samples
    channels, height, width = input_shape
    _check_query(query, height, width)

    def draw(index: int) -> Tensor:
        if sampler is not None:
            return sampler(index)
        rng = np.random.default_rng([seed, index])
        return Tensor.random_normal((channels, height, width), rng)

    def run(index: int) -> np.ndarray:
        magnitude = input_gradient(model, draw(index), query)
        logger.debug("erf_sample_done", sample=index, peak=float(magnitude.max()))
        return magnitude

    with ThreadPoolExecutor(max_workers=max_workers or settings.max_workers) as pool:
        maps = list(pool.map(run, range(n_samples)))

    total = np.zeros((height, width))
    for magnitude in maps:
        total += magnitude
    total /= n_samples
    return ErfMap(grid=_normalized(total), query=query, n_samples=n_samples)


def structured_sampler(input_shape: Sequence[int], seed: int = 0) -> Sampler:
    """Smooth inputs: one Gaussian blob per sample, random per-channel gain, faint noise"""
    channels, height, width = input_shape

    def draw(index: int) -> Tensor:
        rng = np.random.default_rng([seed, index])
        pattern = blob_pattern(height, width, rng.uniform(0.25, 0.75, size=(1, 2)), sigma=0.15)
        gains = rng.standard_normal(channels)
        noise = 0.01 * rng.standard_normal((channels, height, width))
        return Tensor.adopt(gains[:, None, None] * pattern[None] + noise)

    return draw


def erf_map_finite_diff(model: Model, x: Tensor, query: Position, eps: Optional[float] = None) -> ErfMap:
    """Single-input ERF from central differences; slow, for tiny shapes"""
    _check_query(query, x.shape[1], x.shape[2])

    def scalar(probe: Tensor) -> Tensor:
        return _query_scalar(model(probe), query)

    grad = finite_diff(scalar, x, eps=eps)
    return ErfMap(grid=_normalized(np.abs(grad.data).sum(axis=0)), query=query, n_samples=1)


def support_mask(erf: ErfMap, tolerance: float = 1e-10) -> np.ndarray:
    return erf.grid.data[0] > tolerance


def support_bbox(mask: np.ndarray) -> Optional[Tuple[Position, Position]]:
    """((top, left), (bottom, right)) of the nonzero region, inclusive; None when empty"""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return (int(rows[0]), int(cols[0])), (int(rows[-1]), int(cols[-1]))


# ---------------------------------------------------------------------------
# Theoretical receptive regions
# ---------------------------------------------------------------------------


def pointwise_region(height: int, width: int, query: Position) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    mask[query] = True
    return mask


def global_region(height: int, width: int) -> np.ndarray:
    return np.ones((height, width), dtype=bool)


def window_region(height: int, width: int, query: Position, window: int) -> np.ndarray:
    """The P×P query window that holds the query pixel"""
    mask = np.zeros((height, width), dtype=bool)
    top, left = (query[0] // window) * window, (query[1] // window) * window
    mask[top : top + window, left : left + window] = True
    return mask


def _dilate(indices: np.ndarray, size: int, before: int, after: int) -> np.ndarray:
    grown = set()
    for index in indices:
        grown.update(range(max(0, index - before), min(size, index + after + 1)))
    return np.array(sorted(grown), dtype=np.int64)


def context_region(height: int, width: int, query: Position, cfg: AttnConfig) -> np.ndarray:
    """
    Input pixels a VWA output pixel can depend on

    The RP×RP context of the query's window, mapped back through the
    padding (copies land on their sources, zeros on nothing), widened by
    the DOPE kernel for the pre-scaling strategy, plus the query pixel.
    """
    spec = cfg.pad_spec
    span = cfg.ratio * cfg.window
    top = (query[0] // cfg.window) * cfg.window
    left = (query[1] // cfg.window) * cfg.window

    row_sources = pad_source_map(height, spec)[top : top + span]
    col_sources = pad_source_map(width, spec)[left : left + span]
    rows = np.unique(row_sources[row_sources >= 0])
    cols = np.unique(col_sources[col_sources >= 0])

    if cfg.strategy == RescaleStrategy.PRE_DOPE_PE:
        # DOPE output pixel r reads input rows r - (R-1)//2 .. r + R//2
        before, after = (cfg.ratio - 1) // 2, cfg.ratio // 2
        rows = _dilate(rows, height, before, after)
        cols = _dilate(cols, width, before, after)

    mask = np.zeros((height, width), dtype=bool)
    mask[np.ix_(rows, cols)] = True
    mask[query] = True
    return mask


# ---------------------------------------------------------------------------
# Model factory (erf command)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErfModel:
    """A named model for ERF runs together with its theoretical region"""

    name: str
    forward: Model
    input_shape: Tuple[int, int, int]
    region: np.ndarray


MODEL_SPECS = ("short", "lwa", "ga", "vwa:R", "vwformer-stage")


def build_erf_model(
    spec: str,
    size: int,
    query: Position,
    attn: AttnSection,
    window: Optional[int] = None,
    seed: int = 0,
) -> ErfModel:
    """
    Resolve a model spec: short | lwa | ga | vwa:R | vwformer-stage

    The window defaults to the decoder rule side/8 (at least 1).

    Raises:
        ConfigError: unknown spec or invalid attention geometry
    """
    channels = attn.channels
    window = window or attn.window or max(1, size // 8)
    shape = (channels, size, size)
    _check_query(query, size, size)

    if spec == "short":
        lmap = init_lwa_weights(channels, seed)["query"]
        return ErfModel(
            spec,
            lambda x: ops.conv2d(x, lmap.weight, lmap.bias),
            shape,
            pointwise_region(size, size, query),
        )
    if spec == "lwa":
        w = init_lwa_weights(channels, seed)
        return ErfModel(
            spec,
            lambda x: lwa_forward(x, w, window, attn.heads),
            shape,
            window_region(size, size, query, window),
        )
    if spec == "ga":
        w = init_lwa_weights(channels, seed)
        return ErfModel(spec, lambda x: ga_forward(x, w, attn.heads), shape, global_region(size, size))
    if spec.startswith("vwa:"):
        try:
            ratio = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"cannot read a ratio from model spec '{spec}'") from None
        cfg = make_config(
            channels=channels,
            window=window,
            ratio=ratio,
            heads=attn.heads,
            pad_mode=attn.pad_mode,
            strategy=attn.strategy,
        )
        w = init_attn_weights(cfg, seed)
        return ErfModel(
            spec,
            lambda x: vwa_forward(x, w, cfg),
            shape,
            context_region(size, size, query, cfg),
        )
    if spec == "vwformer-stage":
        decoder = VWFormerConfig(
            agg_channels=channels,
            heads=attn.heads,
            window_grid=size // window,
            pad_mode=attn.pad_mode,
            strategy=attn.strategy,
        )
        weights = init_decoder_weights(decoder, (channels,) * 4, seed)
        region = pointwise_region(size, size, query)
        for ratio in decoder.scale_group:
            branch = make_config(
                channels=channels,
                window=window,
                ratio=ratio,
                heads=attn.heads,
                pad_mode=attn.pad_mode,
                strategy=attn.strategy,
            )
            region |= context_region(size, size, query, branch)
        return ErfModel(spec, lambda x: multi_scale(x, weights, decoder), shape, region)

    raise ConfigError(f"unknown model spec '{spec}'; expected one of {', '.join(MODEL_SPECS)}")


# ---------------------------------------------------------------------------
# Attention rows & collapse
# ---------------------------------------------------------------------------


def padded_key_mask(
    cfg: AttnConfig, height: int, width: int, window_index: int, key_window: int
) -> List[bool]:
    """
    Which key positions of one window originate from padding

    A key pixel of an unrescaled context is padded when it lies in the
    margin; a rescaled key position covers an R×R block and counts as
    padded only when the whole block is margin.
    """
    interior = zero_pad(Tensor.ones((1, height, width)), cfg.window, cfg.ratio)
    contexts = extract_contexts(interior, cfg.window, cfg.ratio)
    margin = contexts.windows.data[window_index, :, :, 0] == 0.0
    span = contexts.win_h
    if key_window == span:
        return margin.reshape(-1).tolist()
    block = span // key_window
    blocks = margin.reshape(key_window, block, key_window, block).all(axis=(1, 3))
    return blocks.reshape(-1).tolist()


def attention_row_dump(
    cfg: AttnConfig,
    weights: AttnWeights,
    x: Tensor,
    window_index: int,
    query_index: int,
    head: int = 0,
) -> AttentionRow:
    """
    One softmax row of a VWA forward, with a padded flag per key position

    Raises:
        BoundsError: window, query or head index out of range
    """
    probs = attention_probs(x, weights, cfg)
    windows = probs.shape[0] // cfg.heads
    if not 0 <= window_index < windows:
        raise BoundsError(f"window index {window_index} outside [0, {windows})")
    if not 0 <= query_index < probs.shape[1]:
        raise BoundsError(f"query index {query_index} outside [0, {probs.shape[1]})")
    if not 0 <= head < cfg.heads:
        raise BoundsError(f"head {head} outside [0, {cfg.heads})")

    row = probs.data[window_index * cfg.heads + head, query_index]
    key_window = int(round(np.sqrt(row.size)))
    padded = padded_key_mask(cfg, x.shape[1], x.shape[2], window_index, key_window)
    return AttentionRow(
        weights=row.tolist(),
        padded=padded,
        window_index=window_index,
        query_index=query_index,
    )


def collapse_metric(weights: Sequence[float], padded: Sequence[bool]) -> CollapseMetric:
    """
    Distinct values and entropy of the padded part of an attention row

    Values are compared after rounding to 12 decimals; the entropy is the
    Shannon entropy (nats) of the padded weights renormalized to sum 1.

    Raises:
        ContractError: length mismatch or no padded position
    """
    if len(weights) != len(padded):
        raise ContractError(f"{len(weights)} weights vs {len(padded)} mask entries")
    values = np.asarray(weights, dtype=np.float64)[np.asarray(padded, dtype=bool)]
    if values.size == 0:
        raise ContractError("collapse metric needs at least one padded position")

    distinct = len(set(np.round(values, 12).tolist()))
    total = values.sum()
    entropy = 0.0
    if total > 0:
        p = values / total
        p = p[p > 0]
        entropy = float(-(p * np.log(p)).sum())
    return CollapseMetric(distinct_count=distinct, padded_entropy=entropy, padded_count=int(values.size))


def corner_collapse(
    cfg: AttnConfig, seed: int = 0, size: Optional[int] = None
) -> CollapseMetric:
    """
    Collapse metric of the top-left window, first query, under zero key bias

    The input has strictly distinct entries so any equality among padded
    weights comes from the padding itself.
    """
    size = size or 2 * cfg.ratio * cfg.window
    rng = np.random.default_rng(seed)
    x = Tensor.adopt(rng.permutation(cfg.channels * size * size).reshape(cfg.channels, size, size) / (size * size))
    weights = init_attn_weights(cfg, seed)
    weights = with_zero_bias(weights, [rescaler_registry.get(cfg.strategy).key_map])
    row = attention_row_dump(cfg, weights, x, window_index=0, query_index=0)
    metric = collapse_metric(row.weights, row.padded)
    logger.info(
        "collapse_measured",
        pad_mode=cfg.pad_mode.value,
        strategy=cfg.strategy.value,
        distinct_count=metric.distinct_count,
        padded_count=metric.padded_count,
    )
    return metric
