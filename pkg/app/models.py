"""
Domain Models
Pydantic models voor configs, gewichten en rapporten
"""

import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveInt,
    computed_field,
    field_validator,
    model_validator,
)

from app.core.tensor import Tensor


class PadMode(str, Enum):
    """How context windows are padded at the feature border"""

    ZERO = "zero"
    COPY_SHIFT = "csp"


class RescaleStrategy(str, Enum):
    """Ways to bring an RP×RP context back to the query's P×P size"""

    NO_RESCALE = "none"
    POST_PE = "post-pe"
    POST_AVG_POOL = "post-avgpool"
    PRE_DOPE_PE = "pre-dope-pe"


class Variant(str, Enum):
    """Attention mechanisms known to the cost model"""

    GA = "ga"
    LWA = "lwa"
    VWA_NO_RESCALE = "vwa-none"
    VWA_POST_PE = "vwa-post-pe"
    VWA_POST_AVG_POOL = "vwa-post-avgpool"
    VWA_PRE_DOPE_PE = "vwa-pre-dope-pe"

    @property
    def strategy(self) -> Optional[RescaleStrategy]:
        """Rescaling strategy of a VWA variant (None for GA/LWA)"""
        return _VARIANT_STRATEGY.get(self)

    @classmethod
    def for_strategy(cls, strategy: RescaleStrategy) -> "Variant":
        for variant, candidate in _VARIANT_STRATEGY.items():
            if candidate == strategy:
                return variant
        raise KeyError(strategy)


_VARIANT_STRATEGY = {
    Variant.VWA_NO_RESCALE: RescaleStrategy.NO_RESCALE,
    Variant.VWA_POST_PE: RescaleStrategy.POST_PE,
    Variant.VWA_POST_AVG_POOL: RescaleStrategy.POST_AVG_POOL,
    Variant.VWA_PRE_DOPE_PE: RescaleStrategy.PRE_DOPE_PE,
}


class PadSpec(BaseModel):
    """
    Padding Geometry

    Per-side margin (R-1)·P/2, derived from the slice widths of copy-shift padding
    """

    model_config = ConfigDict(frozen=True)

    mode: PadMode = PadMode.COPY_SHIFT
    window: PositiveInt
    ratio: PositiveInt

    @computed_field
    @property
    def margin(self) -> int:
        return (self.ratio - 1) * self.window // 2

    @model_validator(mode="after")
    def _check_parity(self) -> "PadSpec":
        if self.ratio > 1 and self.window % 2:
            raise ValueError(f"window P={self.window} must be even when R={self.ratio} > 1")
        return self


class AttnConfig(BaseModel):
    """
    Attention Hyperparameters

    channels C, window P, varying ratio R, head count h
    """

    model_config = ConfigDict(frozen=True)

    channels: PositiveInt
    window: PositiveInt
    ratio: PositiveInt = 1
    heads: PositiveInt = 8
    pad_mode: PadMode = PadMode.COPY_SHIFT
    strategy: RescaleStrategy = RescaleStrategy.PRE_DOPE_PE

    @computed_field
    @property
    def head_dim(self) -> int:
        return self.channels // self.heads

    @computed_field
    @property
    def softmax_scale(self) -> float:
        return 1.0 / math.sqrt(self.head_dim)

    @property
    def pad_spec(self) -> PadSpec:
        return PadSpec(mode=self.pad_mode, window=self.window, ratio=self.ratio)

    @property
    def reduced_channels(self) -> int:
        """DOPE output width C/R²"""
        return self.channels // (self.ratio * self.ratio)

    @model_validator(mode="after")
    def _check_divisibility(self) -> "AttnConfig":
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.strategy == RescaleStrategy.PRE_DOPE_PE and self.channels % (self.ratio**2):
            raise ValueError(
                f"channels {self.channels} not divisible by R²={self.ratio ** 2} (DOPE width)"
            )
        if self.ratio > 1 and self.window % 2:
            raise ValueError(f"window P={self.window} must be even when R={self.ratio} > 1")
        return self


class LinearMap(BaseModel):
    """Weight + bias of one linear map or convolution"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weight: Tensor
    bias: Tensor

    @model_validator(mode="after")
    def _check_shapes(self) -> "LinearMap":
        if len(self.weight.shape) != 4:
            raise ValueError(f"weight must be Cout×Cin×k×k, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError(f"bias shape {self.bias.shape} does not match Cout={self.weight.shape[0]}")
        return self

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @property
    def param_count(self) -> int:
        return self.weight.size + self.bias.size


class AttnWeights(BaseModel):
    """Named linear maps of one attention layer (query, key, value, out, dope, pe_key, pe_value)"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    maps: Dict[str, LinearMap]

    def __getitem__(self, name: str) -> LinearMap:
        return self.maps[name]

    def __contains__(self, name: str) -> bool:
        return name in self.maps

    def replace(self, **maps: LinearMap) -> "AttnWeights":
        return AttnWeights(maps={**self.maps, **maps})


class CostConfig(BaseModel):
    """Geometry a cost report refers to"""

    model_config = ConfigDict(frozen=True)

    H: PositiveInt
    W: PositiveInt
    C: PositiveInt
    P: PositiveInt
    R: PositiveInt = 1


class CostReport(BaseModel):
    """
    Cost Report

    Multiply-accumulates and activation element counts, split per category
    """

    variant: Variant
    config: CostConfig
    macs_linear: NonNegativeInt = 0
    macs_attention: NonNegativeInt = 0
    mem_linear_elems: NonNegativeInt = 0
    mem_attn_elems: NonNegativeInt = 0

    @computed_field
    @property
    def macs_total(self) -> int:
        return self.macs_linear + self.macs_attention


class CostDiff(BaseModel):
    """Per-field integer difference a - b of two cost reports"""

    config: CostConfig
    variant_a: Variant
    variant_b: Variant
    macs_linear: int
    macs_attention: int
    mem_linear_elems: int
    mem_attn_elems: int

    @computed_field
    @property
    def macs_total(self) -> int:
        return self.macs_linear + self.macs_attention

    @property
    def is_zero(self) -> bool:
        return not any(
            (self.macs_linear, self.macs_attention, self.mem_linear_elems, self.mem_attn_elems)
        )


class SweepRow(BaseModel):
    """
    One cost-sweep cell

    analytic/diff are None when the sweep runs measure-only.
    """

    variant: Variant
    config: CostConfig
    measured: CostReport
    analytic: Optional[CostReport] = None
    diff: Optional[CostDiff] = None
    linear_ratio_vs_lwa: float

    @property
    def agrees(self) -> bool:
        return self.diff is None or self.diff.is_zero


class VWFormerConfig(BaseModel):
    """
    Decoder Wiring

    Standard: 512 → 2048 → 512 → 560 → 256. Efficient: 128 → 512 → 128 → 160 → 128.
    With lle off the fuse stage carries only up(F1): 512 → 2048 → 512 → 512 → 256.
    """

    model_config = ConfigDict(frozen=True)

    agg_channels: PositiveInt = 512
    scale_group: Tuple[PositiveInt, ...] = (2, 4, 8)
    lle_channels: PositiveInt = 48
    out_channels: PositiveInt = 256
    num_classes: PositiveInt = 19
    heads: PositiveInt = 8
    window_grid: PositiveInt = 8
    pad_mode: PadMode = PadMode.COPY_SHIFT
    strategy: RescaleStrategy = RescaleStrategy.PRE_DOPE_PE
    lle: bool = True

    @classmethod
    def standard(cls, num_classes: int = 19, lle: bool = True) -> "VWFormerConfig":
        return cls(num_classes=num_classes, lle=lle)

    @classmethod
    def efficient(cls, num_classes: int = 19, lle: bool = True) -> "VWFormerConfig":
        return cls(agg_channels=128, lle_channels=32, out_channels=128, num_classes=num_classes, lle=lle)

    @computed_field
    @property
    def concat_width(self) -> int:
        return (len(self.scale_group) + 1) * self.agg_channels

    @computed_field
    @property
    def fuse_width(self) -> int:
        """Input width of MLP2; without LLE only the upsampled F1 arrives"""
        return self.agg_channels + self.lle_channels if self.lle else self.agg_channels

    @field_validator("scale_group")
    @classmethod
    def _non_empty(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("scale_group must name at least one ratio")
        return value

    @model_validator(mode="after")
    def _check_widths(self) -> "VWFormerConfig":
        if self.agg_channels % self.heads:
            raise ValueError(f"agg_channels {self.agg_channels} not divisible by heads {self.heads}")
        for ratio in self.scale_group:
            if self.strategy == RescaleStrategy.PRE_DOPE_PE and self.agg_channels % (ratio * ratio):
                raise ValueError(f"agg_channels {self.agg_channels} not divisible by R²={ratio * ratio}")
            if self.pad_mode == PadMode.COPY_SHIFT and ratio > self.window_grid:
                raise ValueError(
                    f"R={ratio} exceeds window grid {self.window_grid}; copy-shift needs R·P <= side"
                )
        return self


class DecoderCostSummary(BaseModel):
    """Measured tallies of one full decoder pass, plus each VWA branch on its own"""

    image_size: Tuple[int, int]
    profile: str
    decoder: VWFormerConfig
    macs_linear: NonNegativeInt
    macs_attention: NonNegativeInt
    mem_linear_elems: NonNegativeInt
    mem_attn_elems: NonNegativeInt
    channel_flow: List[int]
    logits_shape: List[int]
    branches: List[CostReport]

    @computed_field
    @property
    def macs_total(self) -> int:
        return self.macs_linear + self.macs_attention


class ErfMap(BaseModel):
    """Normalized per-pixel gradient-magnitude heatmap of one output position"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Tensor
    query: Tuple[int, int]
    n_samples: PositiveInt

    @model_validator(mode="after")
    def _check_range(self) -> "ErfMap":
        data = self.grid.data
        if len(self.grid.shape) != 3 or self.grid.shape[0] != 1:
            raise ValueError(f"ERF grid must be 1×H×W, got {self.grid.shape}")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("ERF entries must lie in [0, 1]")
        return self

    @property
    def height(self) -> int:
        return self.grid.shape[1]

    @property
    def width(self) -> int:
        return self.grid.shape[2]


class AttentionRow(BaseModel):
    """One softmax row plus a flag per key position that came from padding"""

    weights: List[float]
    padded: List[bool]
    window_index: NonNegativeInt
    query_index: NonNegativeInt

    @model_validator(mode="after")
    def _check_lengths(self) -> "AttentionRow":
        if len(self.weights) != len(self.padded):
            raise ValueError("weights and padded mask differ in length")
        return self


class CollapseMetric(BaseModel):
    """How degenerate the padded part of an attention row is"""

    distinct_count: NonNegativeInt
    padded_entropy: float
    padded_count: NonNegativeInt


class CheckResult(BaseModel):
    """Outcome of one invariant check"""

    suite: str
    name: str
    passed: bool
    detail: Dict[str, object] = Field(default_factory=dict)
    error: Optional[str] = None


# ---------------------------------------------------------------------------
# Run configuration (CLI)
# ---------------------------------------------------------------------------


class SweepConfig(BaseModel):
    """Cost sweep grid; defaults are the acceptance grid"""

    variants: List[Variant] = Field(
        default_factory=lambda: [
            Variant.GA,
            Variant.LWA,
            Variant.VWA_NO_RESCALE,
            Variant.VWA_PRE_DOPE_PE,
        ]
    )
    sizes: List[PositiveInt] = Field(default_factory=lambda: [16, 32])
    channels: List[PositiveInt] = Field(default_factory=lambda: [16, 64])
    windows: List[PositiveInt] = Field(default_factory=lambda: [2, 4])
    ratios: List[PositiveInt] = Field(default_factory=lambda: [1, 2, 4, 8])
    heads: PositiveInt = 8
    pad_mode: PadMode = PadMode.COPY_SHIFT

    def cells(self) -> List[Tuple[Variant, CostConfig]]:
        """
        Every valid (variant, geometry) combination, in grid order

        GA and LWA do not read R, so they get one R=1 cell per window; GA does
        not read P either and keeps only the first window that tiles the map.
        """
        cells = []
        for variant in self.variants:
            for size in self.sizes:
                for channels in self.channels:
                    for window, ratio in self._geometries(variant, size, channels):
                        cells.append((variant, CostConfig(H=size, W=size, C=channels, P=window, R=ratio)))
        return cells

    def _geometries(self, variant: Variant, size: int, channels: int) -> List[Tuple[int, int]]:
        if variant.strategy is None:
            windows = [window for window in self.windows if self._valid(size, channels, window, 1)]
            return [(window, 1) for window in (windows[:1] if variant == Variant.GA else windows)]
        return [
            (window, ratio)
            for window in self.windows
            for ratio in self.ratios
            if self._valid(size, channels, window, ratio)
        ]

    def _valid(self, size: int, channels: int, window: int, ratio: int) -> bool:
        return (
            size % window == 0
            and channels % self.heads == 0
            and channels % (ratio * ratio) == 0
            and ratio * window <= size
            and (ratio == 1 or window % 2 == 0)
        )


class ErfJob(BaseModel):
    """ERF generation job; attention hyperparameters come from the attn section"""

    model: str = "vwa:4"
    size: PositiveInt = 16
    window: Optional[PositiveInt] = None
    query: Optional[Tuple[int, int]] = None
    samples: Optional[PositiveInt] = None
    structured: bool = False


class DemoJob(BaseModel):
    """End-to-end decoder demo on synthetic features"""

    decoder: VWFormerConfig = Field(default_factory=VWFormerConfig.standard)
    image_size: PositiveInt = 256
    profile: str = "swin-b"
    structured: bool = False


class AttnSection(BaseModel):
    """Base attention hyperparameters for erf and checks"""

    channels: PositiveInt = 64
    window: Optional[PositiveInt] = None
    ratio: PositiveInt = 1
    heads: PositiveInt = 8
    pad_mode: PadMode = PadMode.COPY_SHIFT
    strategy: RescaleStrategy = RescaleStrategy.PRE_DOPE_PE

    def resolve(self, window: int, ratio: Optional[int] = None) -> AttnConfig:
        return AttnConfig(
            channels=self.channels,
            window=window,
            ratio=ratio if ratio is not None else self.ratio,
            heads=self.heads,
            pad_mode=self.pad_mode,
            strategy=self.strategy,
        )


class ToolConfig(BaseModel):
    """Structured config file (JSON); every section optional"""

    attn: AttnSection = Field(default_factory=AttnSection)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    erf: ErfJob = Field(default_factory=ErfJob)
    demo: DemoJob = Field(default_factory=DemoJob)


class RunConfig(BaseModel):
    """One CLI invocation"""

    command: str
    config_path: Optional[Path] = None
    out_dir: Path = Path("runs")
    seed: int = 0
    overrides: List[str] = Field(default_factory=list)
    force: bool = False

    @field_validator("overrides")
    @classmethod
    def _key_value(cls, value: List[str]) -> List[str]:
        for item in value:
            if "=" not in item:
                raise ValueError(f"override '{item}' is not key=value")
        return value


# ---------------------------------------------------------------------------
# Weight manifests
# ---------------------------------------------------------------------------


class ManifestEntry(BaseModel):
    """One named map on disk"""

    name: str
    weight_file: str
    weight_shape: List[int]
    bias_file: str
    bias_shape: List[int]


class WeightManifest(BaseModel):
    """Index of a weights directory (manifest.json)"""

    format: str = "VWT1"
    maps: List[ManifestEntry] = Field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return [entry.name for entry in self.maps]
