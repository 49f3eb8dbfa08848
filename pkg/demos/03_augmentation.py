# Data augmentation in both domains: waveform transforms (pitch-shift,
# time-stretch, pink noise) and spectrogram transforms (zero-masking to the
# silence floor, time warping).

import numpy as np

from vocalperc import generate_synthetic
from vocalperc.augment import (
    add_pink_noise,
    default_spectrogram_plan,
    default_waveform_plan,
    expand_dataset,
    mask_spectrogram,
    pitch_shift,
    time_stretch,
    warp_spectrogram,
    SpectrogramDataset,
)
from vocalperc.dsp import mel_spectrogram
from vocalperc.audio_io import SAMPLE_RATE, CLIP_SAMPLES, AudioClip


def dominant_hz(samples):
    spectrum = np.abs(np.fft.rfft(samples, n=32768))
    return np.fft.rfftfreq(32768, 1.0 / SAMPLE_RATE)[np.argmax(spectrum)]


t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
tone = AudioClip(0.5 * np.sin(2 * np.pi * 440.0 * t))
print(f"original tone: {dominant_hz(tone.samples):.2f} Hz")

up = pitch_shift(tone, +1.0)
down = pitch_shift(tone, -1.0)
print(f"+1 semitone  : {dominant_hz(up.samples):.2f} Hz (target 466.16)")
print(f"-1 semitone  : {dominant_hz(down.samples):.2f} Hz (target 415.30)")

slow = time_stretch(tone, 0.85)
fast = time_stretch(tone, 1.15)
print(f"stretch 0.85 : pitch stays at {dominant_hz(slow.samples):.2f} Hz")
print(f"stretch 1.15 : pitch stays at {dominant_hz(fast.samples):.2f} Hz; "
      f"output re-fixed to {len(fast)} samples")

noisy = add_pink_noise(tone, 0.01, np.random.default_rng(0))
print(f"pink noise   : residual peak {np.max(np.abs(noisy.samples - tone.samples)):.4f} "
      f"(factor 0.01 bounds it)")

# the canonical six-variant waveform plan: 100 originals -> 700 clips
train, _ = generate_synthetic(seed=7, n_per_class=25)
expanded = expand_dataset(train, default_waveform_plan(seed=0))
print(f"\nwaveform expansion: {len(train)} -> {len(expanded)} clips")
print("provenance examples:", expanded.provenance[100], "|", expanded.provenance[-1])

# spectrogram-side transforms operate on the square mel images
spec = mel_spectrogram(train.clips[0], 12)
rng = np.random.default_rng(1)
masked = mask_spectrogram(spec, rng)
warped = warp_spectrogram(spec, rng)
print(f"\nmasked entries at the -100 dB floor: {(masked.values == -100.0).sum()} "
      f"of {masked.values.size}")
print(f"warped spectrogram stays {warped.values.shape}")

specs = [mel_spectrogram(c, 12) for c in train.clips[:20]]
ds = SpectrogramDataset(specs, train.labels[:20], "demo", "train")
expanded_specs = expand_dataset(ds, default_spectrogram_plan(seed=2))
print(f"spectrogram expansion: {len(ds)} -> {len(expanded_specs)} images")
