"""
End-to-End Flow Tests
Simuleer complete flows van synthetische features tot artifacts op disk
"""

import numpy as np
from numpy.testing import assert_array_equal

from app.analysis import build_erf_model, erf_map, support_bbox, support_mask
from app.attention import init_attn_weights, make_config, vwa_forward
from app.checks import CheckRunner
from app.core.tensor import Tensor
from app.models import AttnSection, VWFormerConfig
from app.storage import load_decoder_weights, pgm_bytes, read_tensor, save_decoder_weights, write_tensor
from app.storage.weights import load_attn_weights, save_attn_weights
from app.vwformer import decoder_cost, forward, init_decoder_weights, synth_features


class TestEndToEndFlows:
    """Test complete flows over meerdere modules"""

    def test_decoder_weights_survive_disk(self, tmp_path):
        """Test init -> save -> load -> forward geeft dezelfde logits"""
        cfg = VWFormerConfig(
            agg_channels=8, scale_group=(2,), lle_channels=4, out_channels=4, num_classes=3, heads=2, window_grid=2
        )
        features = synth_features(1, 32, 32, profile="tiny", structured=True)
        weights = init_decoder_weights(cfg, features.channels, seed=1)

        logits, summary = decoder_cost(features, weights, cfg, "tiny")
        save_decoder_weights(tmp_path / "weights", weights)
        write_tensor(tmp_path / "logits.vwt", logits)

        reloaded = forward(features, load_decoder_weights(tmp_path / "weights"), cfg)
        assert_array_equal(reloaded.data, read_tensor(tmp_path / "logits.vwt").data)
        assert summary.logits_shape == list(reloaded.shape)

    def test_attention_weights_survive_disk(self, tmp_path):
        cfg = make_config(channels=16, window=2, ratio=2, heads=4)
        weights = init_attn_weights(cfg, seed=5)
        save_attn_weights(tmp_path, weights)
        other = init_attn_weights(cfg, seed=6)
        data = np.random.default_rng(0).standard_normal((16, 8, 8))

        before = vwa_forward(Tensor(data), weights, cfg)
        after = vwa_forward(Tensor(data), load_attn_weights(tmp_path), cfg)
        assert_array_equal(before.data, after.data)
        assert not np.array_equal(vwa_forward(Tensor(data), other, cfg).data, before.data)

    def test_erf_to_heatmap(self):
        """Test ERF van een LWA pixel tot PGM bytes"""
        model = build_erf_model("lwa", 8, (2, 5), AttnSection(channels=8, heads=2), window=4)
        erf = erf_map(model.forward, model.input_shape, (2, 5), n_samples=2)
        blob = pgm_bytes(erf)

        assert support_bbox(support_mask(erf)) == ((0, 4), (3, 7))
        pixels = np.frombuffer(blob[len(b"P5\n8 8\n255\n"):], dtype=np.uint8).reshape(8, 8)
        assert pixels[:, :4].max() == 0
        assert pixels.max() == 255

    def test_check_suites_pass(self):
        """Test dat equivalence en collapse suites slagen"""
        runner = CheckRunner(seed=0)
        results = runner.run("equivalence") + runner.run("collapse")

        assert all(result.passed for result in results), [r.error or r.detail for r in results if not r.passed]
        assert runner.get_stats() == {"passed": 3, "failed": 0}
