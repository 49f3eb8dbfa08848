# The two feature front ends: square mel spectrograms for convolutional
# models, and the 100-dimensional engineered vector (20 descriptors x 5
# functionals) for everything else.

import numpy as np

from vocalperc import generate_synthetic
from vocalperc.dsp import (
    DESCRIPTOR_NAMES,
    FEATURE_NAMES,
    engineered_features,
    fit_standardizer,
    feature_matrix,
    mel_spectrogram,
)

train, _ = generate_synthetic(seed=3, n_per_class=5)
clip = train.clips[0]  # a kick

# square spectrograms: the hop is floor(30000 / n_bands), so an n-band
# analysis yields exactly n frames
for n_bands in (8, 12, 16):
    spec = mel_spectrogram(clip, n_bands)
    print(f"{n_bands:>2} bands -> {spec.values.shape} matrix, "
          f"hop {spec.hop_samples} samples, "
          f"range [{spec.values.min():.1f}, {spec.values.max():.1f}] dB")

# a crude terminal rendering of the 12x12 spectrogram (low band at bottom)
spec = mel_spectrogram(clip, 12)
ramp = " .:-=+*#%@"
lo, hi = spec.values.min(), spec.values.max()
print("\n12x12 mel spectrogram (time ->, frequency ^):")
for row in spec.values[::-1]:
    indices = ((row - lo) / (hi - lo + 1e-12) * (len(ramp) - 1)).astype(int)
    print("   " + "".join(ramp[i] for i in indices))

# engineered features: 13 MFCCs + ZCR + 6 spectral shape statistics,
# each summarized by mean/std/min/max/IQR
vector = engineered_features(clip)
print(f"\nengineered vector length: {len(vector)}")
print(f"descriptors: {', '.join(DESCRIPTOR_NAMES)}")
print("\na few named entries:")
for name in ("mfcc1_mean", "zcr_mean", "centroid_mean", "rolloff_max"):
    print(f"  {name:>14} = {vector[FEATURE_NAMES.index(name)]:10.3f}")

# standardization is fitted on a training matrix and applied everywhere
X = feature_matrix(train.clips)
standardizer = fit_standardizer(X)
Z = standardizer(X)
print(f"\nstandardized train matrix: mean {Z.mean():.2e}, "
      f"per-feature std ~1: {np.allclose(Z.std(axis=0)[Z.std(axis=0) > 0], 1.0)}")
