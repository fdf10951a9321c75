"""Artifacts on disk: binary tensors, weight directories and reports"""

from app.storage.exporters import ArtifactDir, pgm_bytes, ppm_bytes, write_attention_csv, write_sweep_csv
from app.storage.tensor_io import decode_tensor, encode_tensor, read_tensor, write_tensor
from app.storage.weights import load_decoder_weights, save_decoder_weights

__all__ = [
    "ArtifactDir",
    "pgm_bytes",
    "ppm_bytes",
    "write_attention_csv",
    "write_sweep_csv",
    "decode_tensor",
    "encode_tensor",
    "read_tensor",
    "write_tensor",
    "load_decoder_weights",
    "save_decoder_weights",
]
