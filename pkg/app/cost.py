"""
Cost Model
Closed-form MAC/memory budgets, measured counters and the comparison between them
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import ValidationError

from app.attention import (
    ga_forward,
    init_attn_weights,
    init_lwa_weights,
    lwa_forward,
    make_config,
    vwa_forward,
)
from app.config import settings
from app.core.counters import CostCounter, measuring
from app.core.tensor import Tensor
from app.errors import ConfigError, ContractError
from app.models import CostConfig, CostDiff, CostReport, PadMode, SweepRow, Variant

logger = structlog.get_logger()

# (macs_linear, macs_attention, mem_linear_elems, mem_attn_elems)
Tally = Tuple[int, int, int, int]


def _ga(t: int, c: int, p: int, r: int) -> Tally:
    return 4 * t * c * c, 2 * t * t * c, 4 * t * c, t * t


def _lwa(t: int, c: int, p: int, r: int) -> Tally:
    return 4 * t * c * c, 2 * t * p * p * c, 4 * t * c, t * p * p


def _no_rescale(t: int, c: int, p: int, r: int) -> Tally:
    r2 = r * r
    return 2 * (r2 + 1) * t * c * c, 2 * t * r2 * p * p * c, (r2 + 3) * t * c, t * r2 * p * p


def _post_pe(t: int, c: int, p: int, r: int) -> Tally:
    r2 = r * r
    return 2 * (r2 + 1) * t * c * c, 2 * t * p * p * c, (r2 + 3) * t * c, t * p * p


def _post_avg_pool(t: int, c: int, p: int, r: int) -> Tally:
    return 4 * t * c * c, 2 * t * p * p * c, (r * r + 3) * t * c, t * p * p


def _pre_dope_pe(t: int, c: int, p: int, r: int) -> Tally:
    return 5 * t * c * c, 2 * t * p * p * c, 4 * t * c, t * p * p


_FORMULAS: Dict[Variant, Callable[[int, int, int, int], Tally]] = {
    Variant.GA: _ga,
    Variant.LWA: _lwa,
    Variant.VWA_NO_RESCALE: _no_rescale,
    Variant.VWA_POST_PE: _post_pe,
    Variant.VWA_POST_AVG_POOL: _post_avg_pool,
    Variant.VWA_PRE_DOPE_PE: _pre_dope_pe,
}


def cost_config(H: int, W: int, C: int, P: int, R: int = 1) -> CostConfig:
    try:
        return CostConfig(H=H, W=W, C=C, P=P, R=R)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def _check_geometry(variant: Variant, config: CostConfig):
    if variant == Variant.GA:
        return
    if config.H % config.P or config.W % config.P:
        raise ConfigError(f"H={config.H}, W={config.W} not divisible by P={config.P}")
    if variant == Variant.LWA:
        return
    if config.R > 1 and config.P % 2:
        raise ConfigError(f"P={config.P} must be even for R={config.R}")
    if variant == Variant.VWA_PRE_DOPE_PE and config.C % (config.R * config.R):
        raise ConfigError(f"C={config.C} not divisible by R²={config.R * config.R}")


def analytic(variant: Variant, H: int, W: int, C: int, P: int, R: int = 1) -> CostReport:
    """
    Exact integer evaluation of a variant's closed-form budget

    mem_linear counts query output + materialized context + attention output
    + out-map output; mem_attn counts one attention map per head group.

    Raises:
        ConfigError: geometry invalid for the variant
    """
    config = cost_config(H, W, C, P, R)
    _check_geometry(variant, config)
    tally = _FORMULAS[variant](H * W, C, P, R)
    return _report(variant, config, tally)


def _report(variant: Variant, config: CostConfig, tally: Tally) -> CostReport:
    macs_linear, macs_attention, mem_linear, mem_attn = tally
    return CostReport(
        variant=variant,
        config=config,
        macs_linear=macs_linear,
        macs_attention=macs_attention,
        mem_linear_elems=mem_linear,
        mem_attn_elems=mem_attn,
    )


def report_from_counter(counter: CostCounter, variant: Variant, config: CostConfig) -> CostReport:
    return _report(
        variant,
        config,
        (
            counter.macs_linear,
            counter.macs_attention,
            counter.mem_linear_elems,
            counter.mem_attn_elems,
        ),
    )


def measure(run: Callable[[], object], variant: Variant, config: CostConfig) -> CostReport:
    """Run an instrumented forward under a fresh counter and report its tallies"""
    with measuring() as counter:
        run()
    return report_from_counter(counter, variant, config)


def measure_variant(
    variant: Variant,
    config: CostConfig,
    heads: Optional[int] = None,
    pad_mode: PadMode = PadMode.COPY_SHIFT,
    seed: int = 0,
) -> CostReport:
    """Measure one variant on a random input with freshly initialized weights"""
    _check_geometry(variant, config)
    heads = heads or settings.default_heads
    rng = np.random.default_rng(seed)
    x = Tensor.random_normal((config.C, config.H, config.W), rng)

    if variant == Variant.GA:
        w = init_lwa_weights(config.C, seed)
        return measure(lambda: ga_forward(x, w, heads), variant, config)
    if variant == Variant.LWA:
        w = init_lwa_weights(config.C, seed)
        return measure(lambda: lwa_forward(x, w, config.P, heads), variant, config)

    cfg = make_config(
        channels=config.C,
        window=config.P,
        ratio=config.R,
        heads=heads,
        pad_mode=pad_mode,
        strategy=variant.strategy,
    )
    w = init_attn_weights(cfg, seed)
    return measure(lambda: vwa_forward(x, w, cfg), variant, config)


def compare(a: CostReport, b: CostReport) -> CostDiff:
    """
    Per-field a − b

    Raises:
        ContractError: the reports refer to different geometries
    """
    if a.config != b.config:
        raise ContractError(f"cannot compare costs of {a.config} and {b.config}")
    return CostDiff(
        config=a.config,
        variant_a=a.variant,
        variant_b=b.variant,
        macs_linear=a.macs_linear - b.macs_linear,
        macs_attention=a.macs_attention - b.macs_attention,
        mem_linear_elems=a.mem_linear_elems - b.mem_linear_elems,
        mem_attn_elems=a.mem_attn_elems - b.mem_attn_elems,
    )


def extra_cost(H: int, W: int, C: int, P: int, R: int) -> Tuple[int, int]:
    """Naive VWA over LWA in MACs: (2(R²−1)(HW)C², 2(R²−1)(HW)P²C)"""
    t, k = H * W, R * R - 1
    return 2 * k * t * C * C, 2 * k * t * P * P * C


def extra_memory(H: int, W: int, C: int, P: int, R: int) -> Tuple[int, int]:
    """Naive VWA over LWA in activation elements: ((R²−1)(HW)C, (R²−1)(HW)P²)"""
    t, k = H * W, R * R - 1
    return k * t * C, k * t * P * P


def analytic_params(variant: Variant, C: int, R: int = 1) -> int:
    """Parameter count of one attention layer by weight-shape sums (biases included)"""
    base = C * C + C
    if variant == Variant.VWA_POST_PE:
        return 2 * base + 2 * (R * R * C * C + C)
    if variant == Variant.VWA_PRE_DOPE_PE:
        if C % (R * R):
            raise ConfigError(f"C={C} not divisible by R²={R * R}")
        return 5 * C * C + 4 * C + C // (R * R)
    return 4 * base


def _sweep_cell(
    variant: Variant,
    config: CostConfig,
    heads: int,
    pad_mode: PadMode,
    seed: int,
    measure_only: bool,
) -> SweepRow:
    measured = measure_variant(variant, config, heads=heads, pad_mode=pad_mode, seed=seed)
    analytic_report = None if measure_only else analytic(variant, **config.model_dump())
    diff = None if analytic_report is None else compare(measured, analytic_report)
    lwa_linear = 4 * config.H * config.W * config.C * config.C
    row = SweepRow(
        variant=variant,
        config=config,
        measured=measured,
        analytic=analytic_report,
        diff=diff,
        linear_ratio_vs_lwa=measured.macs_linear / lwa_linear,
    )
    logger.info(
        "cost_cell_measured",
        variant=variant.value,
        **config.model_dump(),
        macs_total=measured.macs_total,
        agrees=row.agrees,
    )
    return row


def sweep(
    cells: Sequence[Tuple[Variant, CostConfig]],
    heads: Optional[int] = None,
    pad_mode: PadMode = PadMode.COPY_SHIFT,
    seed: int = 0,
    measure_only: bool = False,
    max_workers: Optional[int] = None,
) -> List[SweepRow]:
    """
    Measure (and optionally check) every cell; rows come back in cell order

    Each worker opens its own counter context, so cells never see each
    other's tallies.
    """
    heads = heads or settings.default_heads
    workers = max_workers or settings.max_workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(
                lambda cell: _sweep_cell(cell[0], cell[1], heads, pad_mode, seed, measure_only),
                cells,
            )
        )
