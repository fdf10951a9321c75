"""
Storage Tests
Tests voor VWT1 tensor files, weight manifests en exporters
"""

import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from app.attention import init_attn_weights, make_config
from app.core.tensor import Tensor
from app.cost import sweep
from app.errors import ConfigError, FormatError, OverwriteError
from app.models import AttentionRow, ErfMap, SweepConfig, Variant, VWFormerConfig
from app.storage import (
    ArtifactDir,
    decode_tensor,
    encode_tensor,
    load_decoder_weights,
    pgm_bytes,
    ppm_bytes,
    read_tensor,
    save_decoder_weights,
    write_attention_csv,
    write_sweep_csv,
    write_tensor,
)
from app.storage.exporters import erf_summary, sweep_columns
from app.storage.tensor_io import read_shape
from app.storage.weights import load_attn_weights, map_files, read_manifest, save_attn_weights
from app.vwformer import init_decoder_weights


@pytest.fixture
def erf():
    grid = np.zeros((1, 3, 4))
    grid[0, 1, 2] = 1.0
    grid[0, 0, 0] = 0.5
    return ErfMap(grid=Tensor.adopt(grid), query=(1, 2), n_samples=2)


class TestTensorFiles:
    """Test het VWT1 formaat"""

    def test_header_layout(self):
        blob = encode_tensor(Tensor(np.arange(6.0).reshape(2, 3)))

        assert blob[:4] == b"VWT1"
        assert blob[4:8] == (2).to_bytes(4, "little")
        assert blob[8:16] == (2).to_bytes(8, "little")
        assert blob[16:24] == (3).to_bytes(8, "little")
        assert len(blob) == 24 + 6 * 8

    def test_decode_restores_values(self):
        original = Tensor.random_normal((2, 3, 4), np.random.default_rng(0))
        assert_array_equal(decode_tensor(encode_tensor(original)).data, original.data)

    def test_bad_magic(self):
        blob = encode_tensor(Tensor([1.0]))
        with pytest.raises(FormatError, match="magic"):
            decode_tensor(b"XXXX" + blob[4:])

    def test_truncated_payload(self):
        blob = encode_tensor(Tensor([1.0, 2.0]))
        with pytest.raises(FormatError):
            decode_tensor(blob[:-3])

    def test_truncated_dims(self):
        blob = encode_tensor(Tensor(np.zeros((2, 2))))
        with pytest.raises(FormatError, match="truncated"):
            decode_tensor(blob[:12])

    def test_files(self, tmp_path):
        path = write_tensor(tmp_path / "x.vwt", Tensor(np.ones((3, 5))))

        assert read_shape(path) == (3, 5)
        assert_array_equal(read_tensor(path).data, np.ones((3, 5)))

    def test_read_shape_rejects_other_files(self, tmp_path):
        path = tmp_path / "x.vwt"
        path.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(FormatError):
            read_shape(path)


class TestWeightFiles:
    """Test weight directories met manifest"""

    def test_attn_weights(self, tmp_path):
        cfg = make_config(channels=8, window=2, ratio=2, heads=2)
        weights = init_attn_weights(cfg, seed=1)
        manifest = save_attn_weights(tmp_path, weights)
        loaded = load_attn_weights(tmp_path)

        assert manifest.names == sorted(weights.maps)
        for name in weights.maps:
            assert_array_equal(loaded[name].weight.data, weights[name].weight.data)
            assert_array_equal(loaded[name].bias.data, weights[name].bias.data)

    def test_decoder_weights(self, tmp_path):
        cfg = VWFormerConfig(agg_channels=16, scale_group=(2, 4), heads=2, window_grid=4)
        weights = init_decoder_weights(cfg, (4, 4, 8, 8), seed=0)
        save_decoder_weights(tmp_path, weights)
        loaded = load_decoder_weights(tmp_path)

        assert set(loaded.maps) == set(weights.maps)
        assert set(loaded.branches) == {2, 4}
        assert_array_equal(loaded.branches[4]["dope"].weight.data, weights.branches[4]["dope"].weight.data)
        assert (tmp_path / "branch_2.query.weight.vwt").exists()

    def test_manifest_shape_mismatch(self, tmp_path):
        cfg = make_config(channels=8, window=2, ratio=1, heads=2)
        save_attn_weights(tmp_path, init_attn_weights(cfg))
        write_tensor(tmp_path / "out.bias.vwt", Tensor(np.zeros(3)))

        with pytest.raises(FormatError, match="out"):
            load_attn_weights(tmp_path)

    def test_broken_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(FormatError):
            read_manifest(tmp_path)


class TestHeatmaps:
    """Test PGM/PPM export"""

    def test_pgm(self, erf):
        blob = pgm_bytes(erf)
        header = b"P5\n4 3\n255\n"

        assert blob.startswith(header)
        pixels = np.frombuffer(blob[len(header):], dtype=np.uint8).reshape(3, 4)
        assert pixels[1, 2] == 255
        assert pixels[0, 0] == 128
        assert pixels[2, 3] == 0

    def test_ppm(self, erf):
        blob = ppm_bytes(erf, cmap="gray")
        header = b"P6\n4 3\n255\n"

        assert blob.startswith(header)
        assert len(blob) == len(header) + 3 * 4 * 3
        pixels = blob[len(header):]
        assert pixels[18:21] == b"\xff\xff\xff"
        assert pixels[33:36] == b"\x00\x00\x00"

    def test_unknown_cmap(self, erf):
        with pytest.raises(ConfigError):
            ppm_bytes(erf, cmap="no-such-map")

    def test_summary(self, erf):
        summary = erf_summary(erf, "lwa", ((0, 0), (1, 2)))

        assert summary["support_bbox"] == [[0, 0], [1, 2]]
        assert summary["support_area"] == 2
        assert summary["query"] == [1, 2]


class TestReports:
    """Test CSV exports"""

    def test_sweep_csv(self, tmp_path):
        grid = SweepConfig(variants=[Variant.LWA], sizes=[16], channels=[16], windows=[4], ratios=[1])
        rows = sweep(grid.cells(), heads=8)
        path = write_sweep_csv(tmp_path / "cost.csv", rows)

        with open(path, newline="") as f:
            records = list(csv.DictReader(f))
        assert list(records[0]) == sweep_columns(measure_only=False)
        assert records[0]["variant"] == "lwa"
        assert records[0]["agrees"] == "True"

    def test_measure_only_columns(self):
        columns = sweep_columns(measure_only=True)
        assert "agrees" not in columns
        assert not any(column.startswith("analytic_") for column in columns)

    def test_attention_csv(self, tmp_path):
        row = AttentionRow(weights=[0.25, 0.75], padded=[True, False], window_index=0, query_index=1)
        path = write_attention_csv(tmp_path / "row.csv", row)

        lines = path.read_text().splitlines()
        assert lines == ["key_index,weight,padded", "0,0.25,1", "1,0.75,0"]


class TestArtifactDir:
    """Test overwrite bescherming"""

    def test_creates_directories(self, tmp_path):
        out = ArtifactDir(tmp_path / "run")
        out.write_json("nested/report.json", {"a": 1})

        assert json.loads((tmp_path / "run" / "nested" / "report.json").read_text()) == {"a": 1}
        assert out.written == [tmp_path / "run" / "nested" / "report.json"]

    def test_refuses_overwrite(self, tmp_path):
        ArtifactDir(tmp_path).write_bytes("x.bin", b"1")
        with pytest.raises(OverwriteError):
            ArtifactDir(tmp_path).write_bytes("x.bin", b"2")

    def test_force_overwrites(self, tmp_path):
        ArtifactDir(tmp_path).write_bytes("x.bin", b"1")
        ArtifactDir(tmp_path, force=True).write_bytes("x.bin", b"2")

        assert (tmp_path / "x.bin").read_bytes() == b"2"

    def test_claim_all_checks_before_writing(self, tmp_path):
        """Test dat één bestaand pad de hele claim weigert"""
        (tmp_path / "b.json").write_text("{}")
        out = ArtifactDir(tmp_path)

        with pytest.raises(OverwriteError, match="b.json"):
            out.claim_all(["a.bin", "b.json", "sub/c.bin"])
        assert not (tmp_path / "a.bin").exists()
        assert not (tmp_path / "sub").exists()
        assert out.written == []

    def test_claimed_paths_are_written_once(self, tmp_path):
        out = ArtifactDir(tmp_path)
        out.claim_all(["a.bin", "sub/c.bin"])
        out.write_bytes("a.bin", b"1")
        out.subdir("sub").write_bytes("c.bin", b"2")

        assert out.written == [tmp_path / "a.bin", tmp_path / "sub" / "c.bin"]

    def test_weights_follow_overwrite_rule(self, tmp_path):
        """Test dat weight files via ArtifactDir niet stil overschreven worden"""
        cfg = make_config(channels=8, window=2, ratio=1, heads=2)
        weights = init_attn_weights(cfg)
        save_attn_weights(ArtifactDir(tmp_path), weights)
        before = (tmp_path / "query.weight.vwt").read_bytes()

        with pytest.raises(OverwriteError):
            save_attn_weights(ArtifactDir(tmp_path), init_attn_weights(cfg, seed=9))
        assert (tmp_path / "query.weight.vwt").read_bytes() == before

        save_attn_weights(ArtifactDir(tmp_path, force=True), init_attn_weights(cfg, seed=9))
        assert (tmp_path / "query.weight.vwt").read_bytes() != before

    def test_map_files_lists_every_write(self, tmp_path):
        cfg = make_config(channels=8, window=2, ratio=1, heads=2)
        weights = init_attn_weights(cfg)
        out = ArtifactDir(tmp_path)
        save_attn_weights(out, weights)

        assert sorted(path.name for path in out.written) == sorted(map_files(weights.maps))
