"""
VWFormer Decoder
Multi-layer aggregation, parallel VWA branches, low-level enhancement en classifier
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict

from app.attention import init_attn_weights, make_config, uniform_map, vwa_forward
from app.core import ops
from app.core.counters import measuring
from app.core.tensor import Tensor
from app.cost import cost_config, report_from_counter
from app.errors import ConfigError, GeometryError, ShapeError
from app.models import (
    AttnConfig,
    AttnWeights,
    CostReport,
    DecoderCostSummary,
    LinearMap,
    Variant,
    VWFormerConfig,
)

logger = structlog.get_logger()

# Stage widths (C4, C8, C16, C32) of the backbones the decoder is usually paired with
CHANNEL_PROFILES: Dict[str, Tuple[int, int, int, int]] = {
    "swin-t": (96, 192, 384, 768),
    "swin-b": (128, 256, 512, 1024),
    "convnext-b": (128, 256, 512, 1024),
    "mit-b0": (32, 64, 160, 256),
    "mit-b2": (64, 128, 320, 512),
    "tiny": (4, 4, 8, 8),
}

LEVELS = (4, 8, 16, 32)


def profile_channels(profile: str) -> Tuple[int, int, int, int]:
    try:
        return CHANNEL_PROFILES[profile]
    except KeyError:
        raise ConfigError(
            f"unknown channel profile '{profile}'; known: {', '.join(sorted(CHANNEL_PROFILES))}"
        ) from None


@dataclass(frozen=True)
class MultiLevelFeatures:
    """
    Backbone pyramid F4, F8, F16, F32

    Level k has spatial size (H/k, W/k). Images are square (H == W) and
    divisible by 32, so one window side P serves both axes.
    """

    f4: Tensor
    f8: Tensor
    f16: Tensor
    f32: Tensor
    height: int
    width: int

    def __post_init__(self):
        if self.height != self.width:
            raise ShapeError(f"image must be square, got {self.height}×{self.width}")
        if self.height % 32 or self.width % 32:
            raise ShapeError(f"image size {self.height}×{self.width} not divisible by 32")
        for level, feature in zip(LEVELS, self.levels):
            expected = (self.height // level, self.width // level)
            if feature.ndim != 3 or feature.shape[1:] != expected:
                raise ShapeError(f"F{level} must be C×{expected[0]}×{expected[1]}, got {feature.shape}")

    @property
    def levels(self) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
        return self.f4, self.f8, self.f16, self.f32

    @property
    def channels(self) -> Tuple[int, int, int, int]:
        return tuple(feature.shape[0] for feature in self.levels)  # type: ignore[return-value]


class DecoderWeights(BaseModel):
    """1×1 maps of the decoder plus one attention layer per ratio of the scale group"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    maps: Dict[str, LinearMap]
    branches: Dict[int, AttnWeights]

    def __getitem__(self, name: str) -> LinearMap:
        return self.maps[name]


@dataclass
class DecoderTrace:
    """Channel widths observed at each stage boundary, plus per-branch costs"""

    widths: List[Tuple[str, int]] = field(default_factory=list)
    branch_costs: Dict[int, CostReport] = field(default_factory=dict)
    measure_branches: bool = False

    def record(self, stage: str, tensor: Tensor):
        self.widths.append((stage, tensor.shape[0]))

    @property
    def flow(self) -> List[int]:
        """aggregate -> branch concat -> MLP1 -> LLE concat -> MLP2"""
        return [width for _, width in self.widths]


def decoder_map_shapes(cfg: VWFormerConfig, channels: Tuple[int, int, int, int]) -> Dict[str, Tuple[int, int, int]]:
    c4, c8, c16, c32 = channels
    agg = cfg.agg_channels
    shapes = {
        "mlp0": (agg, c8 + c16 + c32, 1),
        "short": (agg, agg, 1),
        "mlp1": (agg, cfg.concat_width, 1),
        "mlp2": (cfg.out_channels, cfg.fuse_width, 1),
        "classifier": (cfg.num_classes, cfg.out_channels, 1),
    }
    if cfg.lle:
        shapes["mlp_low"] = (cfg.lle_channels, c4, 1)
    return shapes


def branch_config(cfg: VWFormerConfig, ratio: int, window: int) -> AttnConfig:
    return make_config(
        channels=cfg.agg_channels,
        window=window,
        ratio=ratio,
        heads=cfg.heads,
        pad_mode=cfg.pad_mode,
        strategy=cfg.strategy,
    )


def init_decoder_weights(
    cfg: VWFormerConfig, channels: Tuple[int, int, int, int], seed: int = 0
) -> DecoderWeights:
    """Uniform init; branch i is seeded with seed + i + 1"""
    rng = np.random.default_rng(seed)
    maps = {name: uniform_map(rng, *shape) for name, shape in decoder_map_shapes(cfg, channels).items()}
    branches = {}
    for i, ratio in enumerate(cfg.scale_group):
        # weight shapes do not depend on the window
        shapes_cfg = branch_config(cfg, ratio, 2)
        branches[ratio] = init_attn_weights(shapes_cfg, seed + i + 1)
    return DecoderWeights(maps=maps, branches=branches)


def _linear(x: Tensor, lmap: LinearMap) -> Tensor:
    return ops.conv2d(x, lmap.weight, lmap.bias)


def window_for(cfg: VWFormerConfig, feature: Tensor) -> int:
    """Window rule P = side / window_grid, applied to both spatial sides"""
    _, height, width = feature.shape
    if height != width:
        raise GeometryError(f"window rule needs a square feature, got {height}×{width}")
    if height % cfg.window_grid:
        raise GeometryError(f"feature side {height} not divisible by window grid {cfg.window_grid}")
    window = height // cfg.window_grid
    if window % 2 and any(ratio > 1 for ratio in cfg.scale_group):
        raise GeometryError(f"window P={window} from side {height} must be even")
    return window


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def aggregate(features: MultiLevelFeatures, w: DecoderWeights, trace: Optional[DecoderTrace] = None) -> Tensor:
    """F = MLP0(concat(F8, up(F16), up(F32))) at F8's resolution"""
    _, height, width = features.f8.shape
    up16 = ops.bilinear_upsample(features.f16, height, width)
    up32 = ops.bilinear_upsample(features.f32, height, width)
    stacked = ops.concat([features.f8, up16, up32], axis=0)
    fused = _linear(stacked, w["mlp0"])
    if trace is not None:
        trace.record("aggregate", fused)
    return fused


def multi_scale(
    fused: Tensor, w: DecoderWeights, cfg: VWFormerConfig, trace: Optional[DecoderTrace] = None
) -> Tensor:
    """
    F1 = MLP1(concat(short(F), VWA_R(F) for R in scale_group))

    The branches are independent; they run one after another so a single
    tape can follow all of them.
    """
    window = window_for(cfg, fused)
    paths = [_linear(fused, w["short"])]
    for ratio in cfg.scale_group:
        attn_cfg = branch_config(cfg, ratio, window)
        if trace is not None and trace.measure_branches:
            with measuring() as counter:
                paths.append(vwa_forward(fused, w.branches[ratio], attn_cfg))
            side = fused.shape[1]
            trace.branch_costs[ratio] = report_from_counter(
                counter,
                Variant.for_strategy(cfg.strategy),
                cost_config(side, side, cfg.agg_channels, window, ratio),
            )
        else:
            paths.append(vwa_forward(fused, w.branches[ratio], attn_cfg))

    stacked = ops.concat(paths, axis=0)
    f1 = _linear(stacked, w["mlp1"])
    if trace is not None:
        trace.record("concat", stacked)
        trace.record("multi_scale", f1)
    return f1


def lle_fuse(
    f1: Tensor,
    f4: Tensor,
    w: DecoderWeights,
    trace: Optional[DecoderTrace] = None,
    enhance: bool = True,
) -> Tensor:
    """
    F2 = MLP2(concat(up(F1), MLP_low(F4))) at F4's resolution

    With enhance off (the no-LLE ablation) F4 only sets the resolution and
    MLP2 reads up(F1) alone.
    """
    _, height, width = f4.shape
    upsampled = ops.bilinear_upsample(f1, height, width)
    if enhance:
        stacked = ops.concat([upsampled, _linear(f4, w["mlp_low"])], axis=0)
    else:
        stacked = upsampled
    f2 = _linear(stacked, w["mlp2"])
    if trace is not None:
        trace.record("fuse", stacked)
        trace.record("lle", f2)
    return f2


def forward(
    features: MultiLevelFeatures,
    w: DecoderWeights,
    cfg: VWFormerConfig,
    trace: Optional[DecoderTrace] = None,
) -> Tensor:
    """aggregate -> multi_scale -> lle_fuse -> 1×1 classifier; num_classes×(H/4)×(W/4)"""
    fused = aggregate(features, w, trace)
    f1 = multi_scale(fused, w, cfg, trace)
    f2 = lle_fuse(f1, features.f4, w, trace, enhance=cfg.lle)
    return _linear(f2, w["classifier"])


def decoder_cost(
    features: MultiLevelFeatures, w: DecoderWeights, cfg: VWFormerConfig, profile: str
) -> Tuple[Tensor, DecoderCostSummary]:
    """Run forward once under a counter; returns the logits and the summary"""
    trace = DecoderTrace(measure_branches=True)
    with measuring() as counter:
        logits = forward(features, w, cfg, trace)
    summary = DecoderCostSummary(
        image_size=(features.height, features.width),
        profile=profile,
        decoder=cfg,
        macs_linear=counter.macs_linear,
        macs_attention=counter.macs_attention,
        mem_linear_elems=counter.mem_linear_elems,
        mem_attn_elems=counter.mem_attn_elems,
        channel_flow=trace.flow,
        logits_shape=list(logits.shape),
        branches=[trace.branch_costs[ratio] for ratio in cfg.scale_group],
    )
    logger.info("decoder_measured", macs_total=summary.macs_total, flow=summary.channel_flow)
    return logits, summary


# ---------------------------------------------------------------------------
# Synthetic backbone features
# ---------------------------------------------------------------------------


def blob_pattern(height: int, width: int, centers: np.ndarray, sigma: float) -> np.ndarray:
    rows = (np.arange(height) + 0.5) / height
    cols = (np.arange(width) + 0.5) / width
    pattern = np.zeros((height, width))
    for cy, cx in centers:
        pattern += np.exp(
            -((rows[:, None] - cy) ** 2 + (cols[None, :] - cx) ** 2) / (2.0 * sigma * sigma)
        )
    return pattern


def synth_features(
    seed: int,
    H: int,
    W: int,
    profile: str = "swin-b",
    structured: bool = False,
    blobs: int = 1,
) -> MultiLevelFeatures:
    """
    Deterministic stand-in for backbone features

    Random mode draws every level from a standard normal. Structured mode
    places smooth Gaussian blobs at the same relative positions on every
    level, each channel a random multiple of the pattern plus faint noise.
    """
    channels = profile_channels(profile)
    if H != W:
        raise ShapeError(f"image must be square, got {H}×{W}")
    if H % 32 or W % 32:
        raise ShapeError(f"image size {H}×{W} not divisible by 32")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.25, 0.75, size=(blobs, 2))

    levels = []
    for level, width in zip(LEVELS, channels):
        h, w = H // level, W // level
        if structured:
            pattern = blob_pattern(h, w, centers, sigma=0.08)
            gains = rng.standard_normal(width)
            data = gains[:, None, None] * pattern[None] + 0.01 * rng.standard_normal((width, h, w))
        else:
            data = rng.standard_normal((width, h, w))
        levels.append(Tensor.adopt(data))

    return MultiLevelFeatures(*levels, height=H, width=W)
