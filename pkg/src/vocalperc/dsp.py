"""Feature extraction: square mel spectrograms and engineered descriptors.

Two independent front ends feed the models:

* square log-power mel spectrograms (8x8, 12x12 or 16x16) for the
  convolutional networks, built from a 96 ms Hann window and a hop of
  floor(30000 / n_bands) so the output is always square;
* a 100-dimensional vector of 20 descriptors x 5 functionals (13 MFCCs,
  zero-crossing rate, spectral centroid/spread/skewness/kurtosis/flatness/
  roll-off, each summarized by mean/std/min/max/IQR) for everything else.

Conventions pinned here: mel(f) = 2595*log10(1 + f/700); spectrogram dB
floor 10*log10(1e-10) = -100; MFCCs use a 40-band mel filterbank, natural
log and an orthonormal DCT-II, and "mfcc1" is the 0th cepstral coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip
from .errors import ConfigError, ContractError

MEL_BAND_CHOICES = (8, 12, 16)
WINDOW_SAMPLES = int(0.096 * SAMPLE_RATE)  # 96 ms -> 4233 samples
POWER_FLOOR = 1e-10
DB_FLOOR = 10.0 * np.log10(POWER_FLOOR)  # -100 dB

# engineered-feature analysis framing (independent of the square spectrograms)
DESC_WINDOW = 2048
DESC_HOP = 512
MFCC_BANDS = 40
N_MFCC = 13
ROLLOFF_FRACTION = 0.85

DESCRIPTOR_NAMES = tuple(
    [f"mfcc{i + 1}" for i in range(N_MFCC)]
    + ["zcr", "centroid", "spread", "skewness", "kurtosis", "flatness", "rolloff"]
)
FUNCTIONAL_NAMES = ("mean", "std", "min", "max", "iqr")
FEATURE_NAMES = tuple(
    f"{d}_{f}" for d in DESCRIPTOR_NAMES for f in FUNCTIONAL_NAMES
)
N_FEATURES = len(FEATURE_NAMES)  # 100


@dataclass(frozen=True)
class MelSpectrogram:
    """Square n_bands x n_bands log-power (dB) image of one clip."""

    values: np.ndarray
    n_bands: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.n_bands, self.n_bands):
            raise ContractError(
                f"expected {self.n_bands}x{self.n_bands} matrix, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ContractError("spectrogram contains non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def hop_samples(self) -> int:
        return CLIP_SAMPLES // self.n_bands


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def stft_magnitude(
    samples: np.ndarray, window_samples: int, hop_samples: int, n_frames: int
) -> np.ndarray:
    """Hann-windowed magnitude STFT with left-aligned frames.

    Frame k covers [k*hop, k*hop + window); the signal is zero-padded past
    its end. FFT size is the smallest power of two >= window_samples and the
    returned matrix holds bins 0..N_fft/2.
    """
    if window_samples < 1 or hop_samples < 1 or n_frames < 1:
        raise ContractError("window, hop and frame count must be >= 1")
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    n_fft = next_pow2(window_samples)
    needed = (n_frames - 1) * hop_samples + window_samples
    padded = np.zeros(needed)
    padded[: min(len(samples), needed)] = samples[:needed]
    offsets = np.arange(n_frames) * hop_samples
    frames = padded[offsets[:, None] + np.arange(window_samples)[None, :]]
    window = np.hanning(window_samples)
    return np.abs(np.fft.rfft(frames * window, n=n_fft, axis=1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_fft_bins: int, n_bands: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular mel filters, peak-normalized to 1, spanning 0..sr/2.

    Filter centers are equally spaced on the mel axis; each row is a
    triangle over FFT bin frequencies. A band narrower than the FFT
    resolution (an all-zero row) is a configuration error.
    """
    if n_bands < 1:
        raise ContractError(f"n_bands must be >= 1, got {n_bands}")
    n_fft = (n_fft_bins - 1) * 2
    freqs = np.arange(n_fft_bins) * sample_rate / n_fft
    mel_edges = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_bands + 2)
    hz_edges = mel_to_hz(mel_edges)
    bank = np.zeros((n_bands, n_fft_bins))
    for b in range(n_bands):
        lo, center, hi = hz_edges[b], hz_edges[b + 1], hz_edges[b + 2]
        rising = (freqs - lo) / (center - lo)
        falling = (hi - freqs) / (hi - center)
        bank[b] = np.maximum(0.0, np.minimum(rising, falling))
        if not np.any(bank[b] > 0):
            raise ConfigError(
                f"mel band {b} is empty: {n_bands} bands exceed the resolution "
                f"of a {n_fft}-point FFT at {sample_rate} Hz"
            )
        bank[b] /= bank[b].max()  # peak exactly 1 at the sampled bins
    return bank


def filterbank_centers_hz(n_bands: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Center frequency (Hz) of each mel band."""
    mel_edges = np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_bands + 2)
    return mel_to_hz(mel_edges[1:-1])


def mel_spectrogram(clip: AudioClip, n_bands: int) -> MelSpectrogram:
    """Square log-power mel spectrogram of a fixed-length clip."""
    if n_bands not in MEL_BAND_CHOICES:
        raise ConfigError(f"n_bands must be one of {MEL_BAND_CHOICES}, got {n_bands}")
    if len(clip) != CLIP_SAMPLES:
        raise ContractError(
            f"mel_spectrogram needs a {CLIP_SAMPLES}-sample clip, got {len(clip)}"
        )
    hop = CLIP_SAMPLES // n_bands
    magnitude = stft_magnitude(clip.samples, WINDOW_SAMPLES, hop, n_frames=n_bands)
    bank = mel_filterbank(magnitude.shape[1], n_bands)
    mel_power = magnitude**2 @ bank.T  # frames x bands
    values = 10.0 * np.log10(mel_power + POWER_FLOOR)
    return MelSpectrogram(values.T, n_bands)  # rows = bands, columns = time


# ---------------------------------------------------------------------------
# Engineered descriptors
# ---------------------------------------------------------------------------

def _frame_signal(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    """All frames starting before the end of the signal, zero-padded tail."""
    n_frames = int(np.ceil(len(samples) / hop))
    padded = np.zeros((n_frames - 1) * hop + window)
    padded[: len(samples)] = samples
    offsets = np.arange(n_frames) * hop
    return padded[offsets[:, None] + np.arange(window)[None, :]]


def descriptor_series(clip: AudioClip) -> np.ndarray:
    """The 20 per-frame descriptor time series, shape (20, n_frames).

    Row order matches DESCRIPTOR_NAMES: 13 MFCCs, then zero-crossing rate
    and the six spectral shape statistics. Silent frames use fixed
    conventions (flatness 1, everything else 0) instead of NaN.
    """
    if len(clip) != CLIP_SAMPLES:
        raise ContractError(
            f"descriptor_series needs a {CLIP_SAMPLES}-sample clip, got {len(clip)}"
        )
    frames = _frame_signal(clip.samples, DESC_WINDOW, DESC_HOP)
    n_frames = frames.shape[0]
    n_fft = next_pow2(DESC_WINDOW)
    magnitude = np.abs(np.fft.rfft(frames * np.hanning(DESC_WINDOW), n=n_fft, axis=1))
    power = magnitude**2
    freqs = np.arange(magnitude.shape[1]) * SAMPLE_RATE / n_fft

    out = np.zeros((len(DESCRIPTOR_NAMES), n_frames))

    # MFCCs: 40-band mel power -> ln(. + floor) -> orthonormal DCT-II,
    # keeping coefficients 0..12 (reported as mfcc1..mfcc13).
    mel_bank = mel_filterbank(magnitude.shape[1], MFCC_BANDS)
    log_mel = np.log(power @ mel_bank.T + POWER_FLOOR)
    cepstra = dct(log_mel, type=2, norm="ortho", axis=1)
    out[:N_MFCC] = cepstra[:, :N_MFCC].T

    # zero-crossing rate: fraction of adjacent-sample sign flips per frame
    flips = (frames[:, :-1] * frames[:, 1:]) < 0
    out[13] = flips.sum(axis=1) / (DESC_WINDOW - 1)

    mag_sum = magnitude.sum(axis=1)
    power_sum = power.sum(axis=1)
    live = mag_sum > 0
    centroid = np.zeros(n_frames)
    spread = np.zeros(n_frames)
    skewness = np.zeros(n_frames)
    kurtosis = np.zeros(n_frames)
    flatness = np.ones(n_frames)
    rolloff = np.zeros(n_frames)

    if np.any(live):
        m = magnitude[live]
        w = m / mag_sum[live][:, None]
        c = w @ freqs
        centroid[live] = c
        deviation = freqs[None, :] - c[:, None]
        var = np.einsum("ij,ij->i", w, deviation**2)
        s = np.sqrt(var)
        spread[live] = s
        safe = np.where(s > 0, s, 1.0)
        m3 = np.einsum("ij,ij->i", w, deviation**3)
        m4 = np.einsum("ij,ij->i", w, deviation**4)
        skewness[live] = np.where(s > 0, m3 / safe**3, 0.0)
        kurtosis[live] = np.where(s > 0, m4 / safe**4, 0.0)

        p = power[live]
        geometric = np.exp(np.mean(np.log(p + POWER_FLOOR), axis=1))
        arithmetic = np.mean(p + POWER_FLOOR, axis=1)
        flatness[live] = geometric / arithmetic

        cumulative = np.cumsum(p, axis=1)
        threshold = ROLLOFF_FRACTION * power_sum[live]
        idx = np.argmax(cumulative >= threshold[:, None], axis=1)
        rolloff[live] = freqs[idx]

    out[14] = centroid
    out[15] = spread
    out[16] = skewness
    out[17] = kurtosis
    out[18] = flatness
    out[19] = rolloff
    return out


def apply_functionals(series: np.ndarray) -> np.ndarray:
    """Summarize one time series: mean, population std, min, max, IQR."""
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    if len(series) == 0:
        raise ContractError("cannot summarize an empty series")
    p25, p75 = np.percentile(series, [25.0, 75.0])
    return np.array(
        [series.mean(), series.std(), series.min(), series.max(), p75 - p25]
    )


def engineered_features(clip: AudioClip) -> np.ndarray:
    """The 100-dimensional descriptor-major feature vector of one clip."""
    series = descriptor_series(clip)
    return np.concatenate([apply_functionals(row) for row in series])


def feature_matrix(clips) -> np.ndarray:
    """Stack engineered features for a sequence of clips, one row each."""
    return np.stack([engineered_features(c) for c in clips])


def spectrogram_stack(clips, n_bands: int) -> np.ndarray:
    """Mel spectrograms for a sequence of clips, shape (n, n_bands, n_bands)."""
    return np.stack([mel_spectrogram(c, n_bands).values for c in clips])


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    """Per-feature mean/std fitted on a training set; zero-variance -> std 1."""

    mean: np.ndarray
    std: np.ndarray

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std


def fit_standardizer(train_vectors: np.ndarray) -> Standardizer:
    X = np.asarray(train_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ContractError("standardizer needs a nonempty 2-D training matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return Standardizer(mean, std)


def apply_standardizer(s: Standardizer, vectors: np.ndarray) -> np.ndarray:
    return s(vectors)


def export_feature_csv(path, X: np.ndarray, labels=None) -> None:
    """Write a feature matrix as CSV, one utterance per row, named columns."""
    X = np.asarray(X, dtype=np.float64)
    header = list(FEATURE_NAMES[: X.shape[1]])
    if X.shape[1] != len(header):
        header = [f"f{i}" for i in range(X.shape[1])]
    rows = []
    if labels is not None:
        header = ["label"] + header
        for y, row in zip(labels, X):
            rows.append(",".join([str(int(y))] + [f"{v:.10g}" for v in row]))
    else:
        for row in X:
            rows.append(",".join(f"{v:.10g}" for v in row))
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        fh.write("\n".join(rows) + "\n")
