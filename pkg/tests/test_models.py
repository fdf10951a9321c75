"""
Model Tests
Valideer Pydantic models: configs, gewichten en rapporten
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.tensor import Tensor
from app.models import (
    AttentionRow,
    AttnConfig,
    CostConfig,
    CostDiff,
    CostReport,
    ErfMap,
    LinearMap,
    PadMode,
    PadSpec,
    RescaleStrategy,
    RunConfig,
    SweepConfig,
    ToolConfig,
    Variant,
    VWFormerConfig,
)


class TestAttnConfig:
    """Test AttnConfig model"""

    def test_derived_fields(self):
        """Test head_dim, softmax_scale en reduced_channels"""
        cfg = AttnConfig(channels=64, window=4, ratio=2, heads=8)

        assert cfg.head_dim == 8
        assert cfg.softmax_scale == pytest.approx(1.0 / math.sqrt(8))
        assert cfg.reduced_channels == 16
        assert cfg.pad_spec == PadSpec(mode=PadMode.COPY_SHIFT, window=4, ratio=2)

    def test_defaults(self):
        """Test dat de defaults R=1, CSP en PreDopePe zijn"""
        cfg = AttnConfig(channels=16, window=2)

        assert cfg.ratio == 1
        assert cfg.pad_mode == PadMode.COPY_SHIFT
        assert cfg.strategy == RescaleStrategy.PRE_DOPE_PE

    def test_heads_must_divide_channels(self):
        """Test dat C % h != 0 geweigerd wordt"""
        with pytest.raises(ValidationError, match="heads"):
            AttnConfig(channels=12, window=2, heads=8)

    def test_dope_width_must_divide(self):
        """Test dat PreDopePe C deelbaar door R² vereist"""
        with pytest.raises(ValidationError, match="R²"):
            AttnConfig(channels=24, window=2, ratio=4, heads=8)

        # zonder DOPE geen eis
        cfg = AttnConfig(channels=24, window=2, ratio=4, heads=8, strategy=RescaleStrategy.NO_RESCALE)
        assert cfg.ratio == 4

    def test_odd_window_with_ratio(self):
        """Test dat oneven P alleen bij R=1 mag"""
        AttnConfig(channels=8, window=3, ratio=1)
        with pytest.raises(ValidationError, match="even"):
            AttnConfig(channels=8, window=3, ratio=2, strategy=RescaleStrategy.NO_RESCALE)

    def test_zero_values_rejected(self):
        """Test dat nul-waarden niet mogen"""
        with pytest.raises(ValidationError):
            AttnConfig(channels=0, window=2)
        with pytest.raises(ValidationError):
            AttnConfig(channels=8, window=2, ratio=0)


class TestPadSpec:
    """Test PadSpec model"""

    @pytest.mark.parametrize("window,ratio,margin", [(4, 1, 0), (4, 2, 2), (4, 4, 6), (2, 8, 7)])
    def test_margin(self, window, ratio, margin):
        """Test de marge (R-1)·P/2"""
        assert PadSpec(window=window, ratio=ratio).margin == margin


class TestVariant:
    """Test Variant enum"""

    def test_strategy_mapping(self):
        """Test variant <-> strategy"""
        assert Variant.GA.strategy is None
        assert Variant.LWA.strategy is None
        assert Variant.VWA_PRE_DOPE_PE.strategy == RescaleStrategy.PRE_DOPE_PE
        assert Variant.for_strategy(RescaleStrategy.POST_PE) == Variant.VWA_POST_PE

    def test_values(self):
        """Test string waarden"""
        assert Variant("vwa-none") == Variant.VWA_NO_RESCALE
        assert RescaleStrategy("post-avgpool") == RescaleStrategy.POST_AVG_POOL


class TestLinearMap:
    """Test LinearMap model"""

    def test_properties(self):
        """Test kanalen, kernel en parameter count"""
        lmap = LinearMap(weight=Tensor.zeros((4, 8, 2, 2)), bias=Tensor.zeros((4,)))

        assert lmap.out_channels == 4
        assert lmap.in_channels == 8
        assert lmap.kernel == 2
        assert lmap.param_count == 4 * 8 * 4 + 4

    def test_bias_mismatch(self):
        """Test dat een verkeerde bias shape faalt"""
        with pytest.raises(ValidationError):
            LinearMap(weight=Tensor.zeros((4, 8, 1, 1)), bias=Tensor.zeros((8,)))


class TestCostModels:
    """Test CostReport en CostDiff"""

    def test_macs_total(self):
        """Test dat macs_total de som is"""
        report = CostReport(
            variant=Variant.LWA,
            config=CostConfig(H=16, W=16, C=16, P=4),
            macs_linear=10,
            macs_attention=5,
        )
        assert report.macs_total == 15
        assert report.model_dump()["macs_total"] == 15

    def test_diff_is_zero(self):
        """Test is_zero"""
        config = CostConfig(H=8, W=8, C=8, P=2)
        zero = CostDiff(
            config=config,
            variant_a=Variant.LWA,
            variant_b=Variant.LWA,
            macs_linear=0,
            macs_attention=0,
            mem_linear_elems=0,
            mem_attn_elems=0,
        )
        assert zero.is_zero
        assert not zero.model_copy(update={"mem_attn_elems": -1}).is_zero


class TestVWFormerConfig:
    """Test VWFormerConfig presets en validatie"""

    def test_standard_widths(self):
        """Test standard preset breedtes"""
        cfg = VWFormerConfig.standard()

        assert cfg.agg_channels == 512
        assert cfg.concat_width == 2048
        assert cfg.fuse_width == 560
        assert cfg.out_channels == 256
        assert cfg.scale_group == (2, 4, 8)

    def test_efficient_widths(self):
        """Test efficient preset breedtes"""
        cfg = VWFormerConfig.efficient(num_classes=150)

        assert cfg.concat_width == 512
        assert cfg.fuse_width == 160
        assert cfg.out_channels == 128
        assert cfg.num_classes == 150

    def test_without_lle(self):
        """Test dat MLP2 zonder LLE alleen agg_channels ziet"""
        cfg = VWFormerConfig(lle=False)

        assert cfg.fuse_width == 512
        assert cfg.model_dump()["fuse_width"] == 512

    def test_empty_scale_group(self):
        """Test dat een lege scale group faalt"""
        with pytest.raises(ValidationError):
            VWFormerConfig(scale_group=())

    def test_ratio_beyond_grid(self):
        """Test dat R > window_grid met CSP geweigerd wordt"""
        with pytest.raises(ValidationError):
            VWFormerConfig(window_grid=4)


class TestErfAndRows:
    """Test ErfMap en AttentionRow"""

    def test_erf_range(self):
        """Test dat waarden buiten [0, 1] falen"""
        ErfMap(grid=Tensor.adopt(np.array([[[0.0, 1.0]]])), query=(0, 0), n_samples=1)
        with pytest.raises(ValidationError):
            ErfMap(grid=Tensor.adopt(np.array([[[0.0, 2.0]]])), query=(0, 0), n_samples=1)

    def test_erf_grid_shape(self):
        """Test dat de grid 1×H×W moet zijn"""
        with pytest.raises(ValidationError):
            ErfMap(grid=Tensor.zeros((2, 2, 2)), query=(0, 0), n_samples=1)

    def test_row_lengths(self):
        """Test dat weights en mask even lang zijn"""
        with pytest.raises(ValidationError):
            AttentionRow(weights=[0.5, 0.5], padded=[True], window_index=0, query_index=0)


class TestRunConfig:
    """Test SweepConfig, ToolConfig en RunConfig"""

    def test_default_grid_cells(self):
        """Test dat de default grid alleen geldige cellen oplevert"""
        cells = SweepConfig().cells()

        assert cells
        for _, config in cells:
            assert config.H % config.P == 0
            assert config.C % (config.R * config.R) == 0
            assert config.R * config.P <= config.H

    def test_acceptance_cell_count(self):
        """Test de cellen per variant in de acceptance grid"""
        # C=16: R in {1,2,4}; C=64: R in {1,2,4,8}; RP <= H prunes R=8,P=4 at H=16
        expected = 0
        for size in (16, 32):
            for channels in (16, 64):
                for window in (2, 4):
                    for ratio in (1, 2, 4, 8):
                        if channels % (ratio * ratio) == 0 and ratio * window <= size:
                            expected += 1

        assert expected == 27
        assert len(SweepConfig(variants=[Variant.VWA_PRE_DOPE_PE]).cells()) == expected
        assert len(SweepConfig(variants=[Variant.VWA_NO_RESCALE]).cells()) == expected

    def test_lwa_ignores_ratio(self):
        """Test dat LWA één R=1 cel per (H, C, P) krijgt"""
        cells = SweepConfig(variants=[Variant.LWA]).cells()

        assert len(cells) == 8
        assert {config.R for _, config in cells} == {1}
        assert len({config for _, config in cells}) == len(cells)

    def test_ga_ignores_window_and_ratio(self):
        """Test dat GA één cel per (H, C) krijgt"""
        cells = SweepConfig(variants=[Variant.GA]).cells()

        assert [(config.H, config.C, config.P, config.R) for _, config in cells] == [
            (16, 16, 2, 1),
            (16, 64, 2, 1),
            (32, 16, 2, 1),
            (32, 64, 2, 1),
        ]

    def test_default_grid_has_no_duplicates(self):
        cells = SweepConfig().cells()

        assert len(cells) == 4 + 8 + 27 + 27
        assert len(set(cells)) == len(cells)

    def test_empty_grid(self):
        """Test dat een onmogelijke grid leeg is"""
        assert SweepConfig(sizes=[6], windows=[4]).cells() == []

    def test_tool_config_defaults(self):
        """Test dat alle secties defaults hebben"""
        tool = ToolConfig()

        assert tool.erf.model == "vwa:4"
        assert tool.demo.decoder == VWFormerConfig.standard()
        assert tool.attn.resolve(4, ratio=2).ratio == 2

    def test_overrides_need_key_value(self):
        """Test dat overrides key=value moeten zijn"""
        RunConfig(command="cost", overrides=["attn.R=2"])
        with pytest.raises(ValidationError):
            RunConfig(command="cost", overrides=["attn.R"])
