"""
Report & Heatmap Exporters
PGM/PPM heatmaps, CSV/JSON cost reports, attention-row CSVs and the artifact directory
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Union

import numpy as np
import structlog
from matplotlib import colormaps

from app.errors import ConfigError, OverwriteError
from app.models import AttentionRow, CostReport, ErfMap, SweepRow

logger = structlog.get_logger()

COST_FIELDS = ("macs_linear", "macs_attention", "mem_linear_elems", "mem_attn_elems", "macs_total")


class ArtifactDir:
    """
    Output directory of one command

    Created on first use; an existing file is only replaced with force.
    Commands that write several files call claim_all() first, so a refused
    overwrite leaves the directory untouched.
    """

    def __init__(self, root: Union[str, Path], force: bool = False):
        self.root = Path(root)
        self.force = force
        self.written: List[Path] = []
        self._claimed: Set[Path] = set()

    def subdir(self, name: str) -> "ArtifactDir":
        """View on root/name that shares claims and the written list"""
        child = ArtifactDir(self.root / name, force=self.force)
        child.written = self.written
        child._claimed = self._claimed
        return child

    def claim_all(self, names: Sequence[str]) -> List[Path]:
        """
        Reserve every path before anything is written

        Raises:
            OverwriteError: listing every existing path, when force is off
        """
        paths = [self.root / name for name in names]
        taken = [path for path in paths if path.exists() and path not in self._claimed]
        if taken and not self.force:
            listed = ", ".join(str(path) for path in taken)
            raise OverwriteError(f"{listed} exist(s); pass --force to overwrite")
        self._claimed.update(paths)
        return paths

    def claim(self, name: str) -> Path:
        path = self.root / name
        if path not in self._claimed:
            self.claim_all([name])
        path.parent.mkdir(parents=True, exist_ok=True)
        if path not in self.written:
            self.written.append(path)
        return path

    def write_bytes(self, name: str, blob: bytes) -> Path:
        path = self.claim(name)
        path.write_bytes(blob)
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self.claim(name)
        path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
        return path


# ---------------------------------------------------------------------------
# Heatmaps
# ---------------------------------------------------------------------------


def _levels(erf: ErfMap) -> np.ndarray:
    return np.clip(np.round(erf.grid.data[0] * 255.0), 0, 255).astype(np.uint8)


def pgm_bytes(erf: ErfMap) -> bytes:
    """Binary 8-bit grayscale (P5), 255 = ERF peak"""
    header = f"P5\n{erf.width} {erf.height}\n255\n".encode("ascii")
    return header + _levels(erf).tobytes()


def ppm_bytes(erf: ErfMap, cmap: str = "inferno") -> bytes:
    """Binary RGB (P6) through a matplotlib colormap"""
    try:
        colormap = colormaps[cmap]
    except KeyError:
        raise ConfigError(f"unknown colormap '{cmap}'") from None
    rgba = colormap(erf.grid.data[0])
    rgb = np.clip(np.round(rgba[..., :3] * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{erf.width} {erf.height}\n255\n".encode("ascii")
    return header + rgb.tobytes()


def erf_summary(erf: ErfMap, model: str, bbox) -> Dict[str, Any]:
    return {
        "model": model,
        "query": list(erf.query),
        "n_samples": erf.n_samples,
        "shape": [erf.height, erf.width],
        "support_bbox": None if bbox is None else [list(bbox[0]), list(bbox[1])],
        "support_area": int(np.count_nonzero(erf.grid.data[0] > 1e-10)),
    }


# ---------------------------------------------------------------------------
# Cost reports
# ---------------------------------------------------------------------------


def _report_columns(prefix: str, report: Optional[CostReport]) -> Dict[str, Any]:
    if report is None:
        return {}
    return {f"{prefix}_{name}": getattr(report, name) for name in COST_FIELDS}


def sweep_columns(measure_only: bool) -> List[str]:
    columns = ["variant", "H", "W", "C", "P", "R"]
    columns += [f"measured_{name}" for name in COST_FIELDS]
    if not measure_only:
        columns += [f"analytic_{name}" for name in COST_FIELDS]
        columns += [f"diff_{name}" for name in COST_FIELDS]
        columns.append("agrees")
    columns.append("linear_ratio_vs_lwa")
    return columns


def sweep_record(row: SweepRow) -> Dict[str, Any]:
    """Flat CSV record of one sweep row"""
    record: Dict[str, Any] = {"variant": row.variant.value, **row.config.model_dump()}
    record.update(_report_columns("measured", row.measured))
    record.update(_report_columns("analytic", row.analytic))
    if row.diff is not None:
        record.update({f"diff_{name}": getattr(row.diff, name) for name in COST_FIELDS})
        record["agrees"] = row.agrees
    record["linear_ratio_vs_lwa"] = row.linear_ratio_vs_lwa
    return record


def write_sweep_csv(path: Union[str, Path], rows: Sequence[SweepRow], measure_only: bool = False) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=sweep_columns(measure_only))
        writer.writeheader()
        for row in rows:
            writer.writerow(sweep_record(row))
    return path


def sweep_json(rows: Sequence[SweepRow]) -> List[Dict[str, Any]]:
    return [row.model_dump(mode="json") for row in rows]


# ---------------------------------------------------------------------------
# Attention rows
# ---------------------------------------------------------------------------


def write_attention_csv(path: Union[str, Path], row: AttentionRow) -> Path:
    """key_index, weight, padded: one line per key position"""
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["key_index", "weight", "padded"])
        for index, (weight, padded) in enumerate(zip(row.weights, row.padded)):
            writer.writerow([index, repr(float(weight)), int(padded)])
    return path
