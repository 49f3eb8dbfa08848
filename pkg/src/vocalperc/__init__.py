"""Vocal percussion classification toolkit.

Feature extraction (square mel spectrograms + 100 engineered descriptors),
waveform/spectrogram data augmentation, a small from-scratch neural network
engine (MLP / CNN / triplet-CNN), a classic ML classifier suite, and a
benchmarking harness covering accuracy, speed, stability and
interpretability.
"""

__version__ = "0.1.0"

from .audio_io import (
    AudioClip,
    CLASS_NAMES,
    CLIP_SAMPLES,
    OnsetAnnotation,
    SAMPLE_RATE,
    UtteranceDataset,
    generate_synthetic,
    load_participant,
    read_wav,
    segment_by_onsets,
    write_wav,
)

__all__ = [
    "AudioClip",
    "CLASS_NAMES",
    "CLIP_SAMPLES",
    "OnsetAnnotation",
    "SAMPLE_RATE",
    "UtteranceDataset",
    "generate_synthetic",
    "load_participant",
    "read_wav",
    "segment_by_onsets",
    "write_wav",
    "__version__",
]
