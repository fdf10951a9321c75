"""
Cost Model Tests
Gemeten MAC/memory counters tegen de closed-form budgets
"""

from fractions import Fraction

import pytest

from app.cost import (
    analytic,
    analytic_params,
    compare,
    cost_config,
    extra_cost,
    extra_memory,
    measure_variant,
    sweep,
)
from app.errors import ConfigError, ContractError
from app.models import PadMode, SweepConfig, Variant

VARIANTS = [
    Variant.GA,
    Variant.LWA,
    Variant.VWA_NO_RESCALE,
    Variant.VWA_POST_PE,
    Variant.VWA_POST_AVG_POOL,
    Variant.VWA_PRE_DOPE_PE,
]

GRID_CELLS = SweepConfig().cells()

# (H, C, P, R) geometries of the VWA variants in the default grid
VWA_GEOMETRIES = [
    (config.H, config.C, config.P, config.R)
    for variant, config in GRID_CELLS
    if variant == Variant.VWA_PRE_DOPE_PE
]


def cell_id(cell):
    variant, config = cell
    return f"{variant.value}-H{config.H}-C{config.C}-P{config.P}-R{config.R}"


class TestAnalytic:
    """Test de closed-form formules"""

    def test_lwa(self):
        report = analytic(Variant.LWA, 16, 16, 16, 4)
        t = 256

        assert report.macs_linear == 4 * t * 16 * 16
        assert report.macs_attention == 2 * t * 16 * 16
        assert report.mem_linear_elems == 4 * t * 16
        assert report.mem_attn_elems == t * 16

    def test_ga(self):
        report = analytic(Variant.GA, 8, 8, 16, 4)
        assert report.macs_attention == 2 * 64 * 64 * 16
        assert report.mem_attn_elems == 64 * 64

    def test_pre_dope_pe_is_five_quarters_of_lwa(self):
        """Test de 25% overhead in lineaire MACs"""
        vwa = analytic(Variant.VWA_PRE_DOPE_PE, 32, 32, 64, 4, 8)
        lwa = analytic(Variant.LWA, 32, 32, 64, 4, 8)

        assert Fraction(vwa.macs_linear, lwa.macs_linear) == Fraction(5, 4)
        assert vwa.macs_attention == lwa.macs_attention
        assert vwa.mem_linear_elems == lwa.mem_linear_elems
        assert vwa.mem_attn_elems == lwa.mem_attn_elems

    def test_no_rescale_extra_terms(self):
        """Test dat naive VWA precies extra_cost/extra_memory boven LWA zit"""
        naive = analytic(Variant.VWA_NO_RESCALE, 16, 16, 16, 2, 4)
        lwa = analytic(Variant.LWA, 16, 16, 16, 2, 4)
        diff = compare(naive, lwa)

        assert (diff.macs_linear, diff.macs_attention) == extra_cost(16, 16, 16, 2, 4)
        assert (diff.mem_linear_elems, diff.mem_attn_elems) == extra_memory(16, 16, 16, 2, 4)

    def test_extra_terms_vanish_at_r1(self):
        assert extra_cost(16, 16, 16, 4, 1) == (0, 0)
        assert extra_memory(16, 16, 16, 4, 1) == (0, 0)

    def test_geometry_checks(self):
        with pytest.raises(ConfigError):
            analytic(Variant.LWA, 10, 10, 16, 4)
        with pytest.raises(ConfigError):
            analytic(Variant.VWA_PRE_DOPE_PE, 16, 16, 24, 2, 4)
        with pytest.raises(ConfigError):
            analytic(Variant.VWA_NO_RESCALE, 18, 18, 16, 3, 2)
        with pytest.raises(ConfigError):
            cost_config(0, 16, 16, 4)

    def test_ga_ignores_window_divisibility(self):
        assert analytic(Variant.GA, 10, 10, 16, 4).macs_linear == 4 * 100 * 256

    def test_params(self):
        assert analytic_params(Variant.LWA, 16) == 4 * (256 + 16)
        assert analytic_params(Variant.VWA_PRE_DOPE_PE, 16, 2) == 5 * 256 + 4 * 16 + 4
        with pytest.raises(ConfigError):
            analytic_params(Variant.VWA_PRE_DOPE_PE, 24, 4)


class TestMeasured:
    """Test dat de instrumented forward exact de formules raakt"""

    @pytest.mark.parametrize("variant", VARIANTS)
    @pytest.mark.parametrize("ratio", [1, 2, 4])
    def test_measured_equals_analytic(self, variant, ratio):
        config = cost_config(16, 16, 16, 2, ratio)
        measured = measure_variant(variant, config, heads=8)

        assert compare(measured, analytic(variant, 16, 16, 16, 2, ratio)).is_zero

    @pytest.mark.parametrize("pad_mode", list(PadMode))
    def test_padding_does_not_change_cost(self, pad_mode):
        config = cost_config(16, 16, 16, 4, 2)
        measured = measure_variant(Variant.VWA_PRE_DOPE_PE, config, heads=8, pad_mode=pad_mode)

        assert measured == analytic(Variant.VWA_PRE_DOPE_PE, 16, 16, 16, 4, 2)

    def test_large_ratio(self):
        config = cost_config(32, 32, 64, 4, 8)
        for variant in (Variant.LWA, Variant.VWA_PRE_DOPE_PE):
            measured = measure_variant(variant, config, heads=8)
            assert compare(measured, analytic(variant, 32, 32, 64, 4, 8)).is_zero

    def test_reference_values(self):
        """Test de uitgeschreven MAC totalen"""
        cases = [
            (Variant.GA, cost_config(8, 8, 16, 2), 196608),
            (Variant.LWA, cost_config(32, 32, 64, 4), 18874368),
            (Variant.VWA_PRE_DOPE_PE, cost_config(32, 32, 64, 4, 8), 23068672),
            (Variant.VWA_NO_RESCALE, cost_config(32, 32, 64, 4, 8), 679477248),
        ]
        for variant, config, macs in cases:
            assert analytic(variant, **config.model_dump()).macs_total == macs
            assert measure_variant(variant, config, heads=8).macs_total == macs

    def test_reference_memory(self):
        lwa = measure_variant(Variant.LWA, cost_config(32, 32, 64, 4), heads=8)
        naive = measure_variant(Variant.VWA_NO_RESCALE, cost_config(32, 32, 64, 4, 8), heads=8)

        assert (lwa.mem_linear_elems, lwa.mem_attn_elems) == (262144, 16384)
        assert naive.mem_attn_elems == 1048576

    def test_compare_needs_same_config(self):
        a = analytic(Variant.LWA, 16, 16, 16, 4)
        b = analytic(Variant.LWA, 32, 32, 16, 4)
        with pytest.raises(ContractError):
            compare(a, b)


class TestSweep:
    """Test sweep()"""

    def test_rows_in_cell_order(self):
        grid = SweepConfig(
            variants=[Variant.LWA, Variant.VWA_PRE_DOPE_PE],
            sizes=[32],
            channels=[64],
            windows=[4],
            ratios=[8],
        )
        rows = sweep(grid.cells(), heads=8, max_workers=2)

        assert [row.variant for row in rows] == [Variant.LWA, Variant.VWA_PRE_DOPE_PE]
        assert rows[0].linear_ratio_vs_lwa == 1.0
        assert rows[1].linear_ratio_vs_lwa == 1.25
        assert all(row.agrees for row in rows)

    def test_measure_only(self):
        grid = SweepConfig(variants=[Variant.LWA], sizes=[16], channels=[16], windows=[4], ratios=[1])
        rows = sweep(grid.cells(), heads=8, measure_only=True)

        assert rows[0].analytic is None
        assert rows[0].diff is None
        assert rows[0].agrees


class TestAcceptanceGrid:
    """Test de volledige default sweep grid"""

    @pytest.mark.parametrize("cell", GRID_CELLS, ids=cell_id)
    def test_measured_equals_analytic(self, cell):
        variant, config = cell
        measured = measure_variant(variant, config, heads=8)

        assert compare(measured, analytic(variant, **config.model_dump())).is_zero

    @pytest.mark.parametrize("size,channels,window,ratio", VWA_GEOMETRIES)
    def test_pre_dope_pe_against_lwa(self, size, channels, window, ratio):
        """Test 5/4 lineaire MACs en gelijke memory per categorie"""
        lwa = measure_variant(Variant.LWA, cost_config(size, size, channels, window), heads=8)
        vwa = measure_variant(Variant.VWA_PRE_DOPE_PE, cost_config(size, size, channels, window, ratio), heads=8)
        naive = measure_variant(Variant.VWA_NO_RESCALE, cost_config(size, size, channels, window, ratio), heads=8)

        assert Fraction(vwa.macs_linear, lwa.macs_linear) == Fraction(5, 4)
        assert vwa.mem_linear_elems == lwa.mem_linear_elems
        assert vwa.mem_attn_elems == lwa.mem_attn_elems
        extra_linear, extra_attn = extra_memory(size, size, channels, window, ratio)
        assert naive.mem_linear_elems - lwa.mem_linear_elems == extra_linear
        assert naive.mem_attn_elems - lwa.mem_attn_elems == extra_attn
