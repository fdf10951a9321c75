"""
Weight Persistence
One VWT1 file per weight and bias, indexed by manifest.json
"""

import json
from pathlib import Path
from typing import Dict, List, Union

import structlog
from pydantic import ValidationError

from app.errors import FormatError
from app.models import AttnWeights, LinearMap, ManifestEntry, WeightManifest
from app.storage.exporters import ArtifactDir
from app.storage.tensor_io import encode_tensor, read_tensor
from app.vwformer import DecoderWeights

logger = structlog.get_logger()

MANIFEST = "manifest.json"
BRANCH_PREFIX = "branch_"


WeightTarget = Union[str, Path, ArtifactDir]


def _entry(name: str, lmap: LinearMap) -> ManifestEntry:
    return ManifestEntry(
        name=name,
        weight_file=f"{name}.weight.vwt",
        weight_shape=list(lmap.weight.shape),
        bias_file=f"{name}.bias.vwt",
        bias_shape=list(lmap.bias.shape),
    )


def map_files(maps: Dict[str, LinearMap]) -> List[str]:
    """Every file save_maps writes for these maps, manifest last"""
    files = []
    for name in sorted(maps):
        entry = _entry(name, maps[name])
        files += [entry.weight_file, entry.bias_file]
    return files + [MANIFEST]


def save_maps(target: WeightTarget, maps: Dict[str, LinearMap]) -> WeightManifest:
    """
    Write every map and the manifest; maps are stored in sorted name order

    A plain path is written with overwrite allowed. Pass an ArtifactDir to
    have its overwrite rule cover the weight files too; every file is
    claimed before the first one is written.
    """
    artifacts = target if isinstance(target, ArtifactDir) else ArtifactDir(target, force=True)
    artifacts.claim_all(map_files(maps))

    manifest = WeightManifest()
    for name in sorted(maps):
        lmap = maps[name]
        entry = _entry(name, lmap)
        artifacts.write_bytes(entry.weight_file, encode_tensor(lmap.weight))
        artifacts.write_bytes(entry.bias_file, encode_tensor(lmap.bias))
        manifest.maps.append(entry)

    artifacts.write_json(MANIFEST, manifest.model_dump())
    logger.info("weights_saved", directory=str(artifacts.root), maps=len(manifest.maps))
    return manifest


def read_manifest(directory: Union[str, Path]) -> WeightManifest:
    path = Path(directory) / MANIFEST
    try:
        return WeightManifest(**json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as e:
        raise FormatError(f"{path}: {e}") from e


def load_maps(directory: Union[str, Path]) -> Dict[str, LinearMap]:
    """
    Read back what save_maps wrote

    Raises:
        FormatError: manifest unreadable, or a file disagrees with its listed shape
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    maps = {}
    for entry in manifest.maps:
        weight = read_tensor(directory / entry.weight_file)
        bias = read_tensor(directory / entry.bias_file)
        if list(weight.shape) != entry.weight_shape or list(bias.shape) != entry.bias_shape:
            raise FormatError(f"map '{entry.name}' does not match its manifest shapes")
        maps[entry.name] = LinearMap(weight=weight, bias=bias)
    return maps


def save_attn_weights(target: WeightTarget, weights: AttnWeights) -> WeightManifest:
    return save_maps(target, weights.maps)


def load_attn_weights(directory: Union[str, Path]) -> AttnWeights:
    return AttnWeights(maps=load_maps(directory))


def flat_decoder_maps(weights: DecoderWeights) -> Dict[str, LinearMap]:
    """Branch maps are named branch_<R>.<map>"""
    flat = dict(weights.maps)
    for ratio, branch in weights.branches.items():
        for name, lmap in branch.maps.items():
            flat[f"{BRANCH_PREFIX}{ratio}.{name}"] = lmap
    return flat


def save_decoder_weights(target: WeightTarget, weights: DecoderWeights) -> WeightManifest:
    return save_maps(target, flat_decoder_maps(weights))


def load_decoder_weights(directory: Union[str, Path]) -> DecoderWeights:
    maps: Dict[str, LinearMap] = {}
    branches: Dict[int, Dict[str, LinearMap]] = {}
    for name, lmap in load_maps(directory).items():
        if name.startswith(BRANCH_PREFIX):
            ratio, _, map_name = name[len(BRANCH_PREFIX):].partition(".")
            branches.setdefault(int(ratio), {})[map_name] = lmap
        else:
            maps[name] = lmap
    return DecoderWeights(
        maps=maps,
        branches={ratio: AttnWeights(maps=branch) for ratio, branch in branches.items()},
    )
