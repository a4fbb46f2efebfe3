"""Singing voice synthesis: feature extraction, training and synthesis."""

import torch  # noqa: F401  loads the libtorch shared libraries first

from ._wesinger2 import (
    FeatureConfig,
    WeSingerError,
    compute_mel,
    estimate_f0,
    f0_rmse,
    hz_to_piano_key,
    interpolate_f0,
    lr_at,
    make_toy_corpus,
    mel_distortion,
    note_frames,
    parse_score,
    piano_key_to_hz,
    prepare_cache,
    quantize_to_piano_keys,
    synthesize,
    train,
)

__all__ = [
    "FeatureConfig",
    "WeSingerError",
    "compute_mel",
    "estimate_f0",
    "f0_rmse",
    "hz_to_piano_key",
    "interpolate_f0",
    "lr_at",
    "make_toy_corpus",
    "mel_distortion",
    "note_frames",
    "parse_score",
    "piano_key_to_hz",
    "prepare_cache",
    "quantize_to_piano_keys",
    "synthesize",
    "train",
]
