"""
Invariant Check Suites
Runs the equivalence, gradient, collapse and channel-flow checks and tallies the outcome
"""

import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import structlog

from app import vwformer
from app.analysis import corner_collapse
from app.attention import (
    init_attn_weights,
    init_lwa_weights,
    lwa_forward,
    make_config,
    vwa_forward,
    vwa_weights_from_lwa,
)
from app.autodiff import gradcheck, sample_coords
from app.config import settings
from app.core import ops
from app.core.tensor import Tensor
from app.errors import ConfigError
from app.models import CheckResult, PadMode, RescaleStrategy, VWFormerConfig

logger = structlog.get_logger()

Detail = Dict[str, object]
Check = Callable[[int], Tuple[bool, Detail]]

EQUIVALENCE_SEEDS = 5
EQUIVALENCE_TOLERANCE = 1e-12
GRADCHECK_PROBES = 48


# ---------------------------------------------------------------------------
# Equivalence
# ---------------------------------------------------------------------------


def lwa_equivalence(seed: int) -> Tuple[bool, Detail]:
    """vwa_forward at R=1 with identity DOPE reproduces lwa_forward"""
    worst = 0.0
    for offset in range(EQUIVALENCE_SEEDS):
        rng = np.random.default_rng(seed + offset)
        x = Tensor.random_normal((16, 16, 16), rng)
        lwa_weights = init_lwa_weights(16, seed + offset)
        cfg = make_config(channels=16, window=4, ratio=1, heads=8, strategy=RescaleStrategy.PRE_DOPE_PE)

        expected = lwa_forward(x, lwa_weights, window=4, heads=8)
        actual = vwa_forward(x, vwa_weights_from_lwa(lwa_weights), cfg)
        worst = max(worst, float(np.max(np.abs(actual.data - expected.data))))
    return worst < EQUIVALENCE_TOLERANCE, {"max_abs_diff": worst, "seeds": EQUIVALENCE_SEEDS}


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _projected(out: Tensor, rng: np.random.Generator) -> Tensor:
    """Scalar <out, r> for a fixed random r, so every output entry matters"""
    probe = Tensor.random_normal(out.shape, rng)
    return ops.sum_all(ops.mul(out, probe))


def _gradcheck_result(f, x: Tensor, seed: int) -> Tuple[bool, Detail]:
    coords = sample_coords(x.size, GRADCHECK_PROBES, seed)
    error = gradcheck(f, x, eps=settings.gradcheck_eps, coords=coords)
    return error < settings.gradcheck_tolerance, {
        "max_rel_error": error,
        "probes": int(len(coords)),
        "tolerance": settings.gradcheck_tolerance,
    }


def lwa_gradients(seed: int) -> Tuple[bool, Detail]:
    rng = np.random.default_rng(seed)
    x = Tensor.random_normal((4, 4, 4), rng)
    w = init_lwa_weights(4, seed)
    probe_rng = np.random.default_rng(seed + 1)
    probe = Tensor.random_normal((4, 4, 4), probe_rng)
    return _gradcheck_result(lambda t: ops.sum_all(ops.mul(lwa_forward(t, w, 2, 2), probe)), x, seed)


def vwa_gradients(seed: int) -> Tuple[bool, Detail]:
    rng = np.random.default_rng(seed)
    cfg = make_config(channels=8, window=2, ratio=2, heads=2, strategy=RescaleStrategy.PRE_DOPE_PE)
    x = Tensor.random_normal((8, 8, 8), rng)
    w = init_attn_weights(cfg, seed)
    probe = Tensor.random_normal((8, 8, 8), np.random.default_rng(seed + 1))
    return _gradcheck_result(lambda t: ops.sum_all(ops.mul(vwa_forward(t, w, cfg), probe)), x, seed)


def tiny_decoder() -> VWFormerConfig:
    return VWFormerConfig(
        agg_channels=8,
        scale_group=(2,),
        lle_channels=4,
        out_channels=4,
        num_classes=3,
        heads=2,
        window_grid=2,
    )


def decoder_gradients(seed: int) -> Tuple[bool, Detail]:
    """Full decoder forward, differentiated with respect to F8"""
    cfg = tiny_decoder()
    features = vwformer.synth_features(seed, 32, 32, profile="tiny")
    weights = vwformer.init_decoder_weights(cfg, features.channels, seed)
    probe = Tensor.random_normal((cfg.num_classes, 8, 8), np.random.default_rng(seed + 1))

    def f(f8: Tensor) -> Tensor:
        pyramid = vwformer.MultiLevelFeatures(
            features.f4, f8, features.f16, features.f32, height=32, width=32
        )
        return ops.sum_all(ops.mul(vwformer.forward(pyramid, weights, cfg), probe))

    return _gradcheck_result(f, features.f8, seed)


# ---------------------------------------------------------------------------
# Collapse
# ---------------------------------------------------------------------------


def _collapse_config(pad_mode: PadMode, strategy: RescaleStrategy):
    # margin (R-1)·P/2 = 6 leaves fully padded 4×4 blocks in the corner context
    return make_config(channels=16, window=4, ratio=4, heads=2, pad_mode=pad_mode, strategy=strategy)


def zero_pad_collapse(seed: int) -> Tuple[bool, Detail]:
    detail: Detail = {}
    passed = True
    for strategy in (RescaleStrategy.PRE_DOPE_PE, RescaleStrategy.NO_RESCALE):
        metric = corner_collapse(_collapse_config(PadMode.ZERO, strategy), seed)
        detail[strategy.value] = metric.model_dump()
        passed = passed and metric.distinct_count == 1
    return passed, detail


def copy_shift_spread(seed: int) -> Tuple[bool, Detail]:
    detail: Detail = {}
    passed = True
    for strategy in (RescaleStrategy.PRE_DOPE_PE, RescaleStrategy.NO_RESCALE):
        metric = corner_collapse(_collapse_config(PadMode.COPY_SHIFT, strategy), seed)
        detail[strategy.value] = metric.model_dump()
        passed = passed and metric.distinct_count > 1
    return passed, detail


# ---------------------------------------------------------------------------
# Channel flow
# ---------------------------------------------------------------------------


def _flow_check(cfg: VWFormerConfig, expected: List[int], seed: int) -> Tuple[bool, Detail]:
    features = vwformer.synth_features(seed, 128, 128, profile="swin-b")
    weights = vwformer.init_decoder_weights(cfg, features.channels, seed)
    trace = vwformer.DecoderTrace()
    logits = vwformer.forward(features, weights, cfg, trace)
    shape = list(logits.shape)
    expected_shape = [cfg.num_classes, 32, 32]
    return trace.flow == expected and shape == expected_shape, {
        "flow": trace.flow,
        "expected": expected,
        "logits_shape": shape,
    }


def standard_flow(seed: int) -> Tuple[bool, Detail]:
    return _flow_check(VWFormerConfig.standard(), [512, 2048, 512, 560, 256], seed)


def efficient_flow(seed: int) -> Tuple[bool, Detail]:
    return _flow_check(VWFormerConfig.efficient(), [128, 512, 128, 160, 128], seed)


SUITES: Dict[str, List[Tuple[str, Check]]] = {
    "equivalence": [("lwa_special_case", lwa_equivalence)],
    "gradcheck": [
        ("lwa_forward", lwa_gradients),
        ("vwa_pre_dope_pe", vwa_gradients),
        ("vwformer_forward", decoder_gradients),
    ],
    "collapse": [
        ("zero_padding_collapses", zero_pad_collapse),
        ("copy_shift_spreads", copy_shift_spread),
    ],
    "channels": [
        ("standard_flow", standard_flow),
        ("efficient_flow", efficient_flow),
    ],
}

SUITE_NAMES = (*SUITES, "all")


class CheckRunner:
    """
    Check Runner

    Voert suites uit en houdt statistieken bij; een falende check stopt de run niet
    """

    def __init__(self, seed: Optional[int] = None, suites: Optional[Dict[str, List[Tuple[str, Check]]]] = None):
        self.seed = settings.default_seed if seed is None else seed
        self.suites = SUITES if suites is None else suites
        self._passed_count = 0
        self._failed_count = 0

    def resolve(self, suite: str) -> List[str]:
        if suite == "all":
            return list(self.suites)
        if suite not in self.suites:
            raise ConfigError(f"unknown suite '{suite}'; expected one of {', '.join(SUITE_NAMES)}")
        return [suite]

    def run_check(self, suite: str, name: str, check: Check) -> CheckResult:
        """Run one check; exceptions become a failed result"""
        start_time = time.time()
        try:
            passed, detail = check(self.seed)
            result = CheckResult(suite=suite, name=name, passed=bool(passed), detail=detail)
        except Exception as e:
            logger.error(
                "check_failed",
                suite=suite,
                check=name,
                error=str(e),
                error_type=type(e).__name__,
            )
            result = CheckResult(suite=suite, name=name, passed=False, error=f"{type(e).__name__}: {e}")

        if result.passed:
            self._passed_count += 1
        else:
            self._failed_count += 1
            if result.error is None:
                logger.warning("check_failed", suite=suite, check=name, detail=result.detail)

        logger.info(
            "check_done",
            suite=suite,
            check=name,
            passed=result.passed,
            duration_ms=round((time.time() - start_time) * 1000, 2),
        )
        return result

    def run(self, suite: str) -> List[CheckResult]:
        """Run a named suite (or all of them) in declaration order"""
        results = []
        for name in self.resolve(suite):
            for check_name, check in self.suites[name]:
                results.append(self.run_check(name, check_name, check))
        return results

    def get_stats(self) -> Dict[str, int]:
        return {"passed": self._passed_count, "failed": self._failed_count}
