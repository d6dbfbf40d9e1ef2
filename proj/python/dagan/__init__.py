"""Dual attention GAN for semantic image synthesis."""

from ._core import (
    CheckpointError,
    NetpbmError,
    Session,
    ShapeError,
    decode_ppm,
    encode_ppm,
    frechet_distance,
    generate_layout,
    gradient_suite,
    miou,
    oracle_segment,
    param_counts,
    pixel_acc,
    render,
)

__all__ = [
    "CheckpointError",
    "NetpbmError",
    "Session",
    "ShapeError",
    "decode_ppm",
    "encode_ppm",
    "frechet_distance",
    "generate_layout",
    "gradient_suite",
    "miou",
    "oracle_segment",
    "param_counts",
    "pixel_acc",
    "render",
]
