"""Data augmentation: waveform transforms and spectrogram transforms.

Waveform side: pitch-shift (phase vocoder + linear-interpolation resample),
time-stretch (phase vocoder), and additive pink noise (Voss-McCartney).
Every waveform transform returns a clip re-fixed to 30000 samples with
values in [-1, 1].

Spectrogram side: frequency/time zero-masking (masked rows and columns are
set to the -100 dB silence floor, since numeric 0 is not silence in log
space) and piecewise-linear time warping.

Expansion is static: an AugmentationPlan turns a dataset into a bigger one
up front, with provenance tags and a mandatory seed. Per-clip RNG streams
are derived from (seed, clip index) so results do not depend on iteration
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio_io import CLIP_SAMPLES, AudioClip, UtteranceDataset
from .dsp import DB_FLOOR, MelSpectrogram
from .errors import ConfigError, ContractError

PV_WINDOW = 2048
PV_HOP = 512

PITCH_SEMITONE_CHOICES = (-1.0, 1.0)
STRETCH_RATE_CHOICES = (0.85, 1.15)
NOISE_FACTOR_CHOICES = (0.005, 0.01)

WAVEFORM_TRANSFORMS = ("pitch_shift", "time_stretch", "add_noise")
SPECTROGRAM_TRANSFORMS = ("mask", "warp")


# ---------------------------------------------------------------------------
# Phase vocoder
# ---------------------------------------------------------------------------

def _stft_complex(x: np.ndarray, n_fft: int = PV_WINDOW, hop: int = PV_HOP) -> np.ndarray:
    """Center-padded complex STFT, frames x bins."""
    pad = n_fft // 2
    padded = np.pad(x, (pad, pad))
    n_frames = 1 + len(x) // hop
    offsets = np.arange(n_frames) * hop
    frames = padded[offsets[:, None] + np.arange(n_fft)[None, :]]
    return np.fft.rfft(frames * np.hanning(n_fft), axis=1)


def _istft(S: np.ndarray, length: int, n_fft: int = PV_WINDOW, hop: int = PV_HOP) -> np.ndarray:
    """Overlap-add inverse of _stft_complex, trimmed to `length` samples."""
    window = np.hanning(n_fft)
    frames = np.fft.irfft(S, n=n_fft, axis=1) * window
    pad = n_fft // 2
    total = n_fft + hop * (S.shape[0] - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    for k in range(S.shape[0]):
        y[k * hop : k * hop + n_fft] += frames[k]
        wsum[k * hop : k * hop + n_fft] += window**2
    y = y / np.maximum(wsum, 1e-12)
    out = y[pad : pad + length]
    if len(out) < length:
        out = np.concatenate([out, np.zeros(length - len(out))])
    return out


def _phase_vocoder(S: np.ndarray, rate: float, n_fft: int = PV_WINDOW, hop: int = PV_HOP) -> np.ndarray:
    """Resample an STFT along time by `rate`, accumulating phase per bin."""
    n_frames, n_bins = S.shape
    time_steps = np.arange(0, n_frames, rate)
    expected = 2.0 * np.pi * hop * np.arange(n_bins) / n_fft
    padded = np.vstack([S, np.zeros((1, n_bins), dtype=S.dtype)])
    out = np.zeros((len(time_steps), n_bins), dtype=np.complex128)
    phase = np.angle(S[0])
    for i, t in enumerate(time_steps):
        k = int(t)
        alpha = t - k
        c0, c1 = padded[k], padded[k + 1]
        magnitude = (1.0 - alpha) * np.abs(c0) + alpha * np.abs(c1)
        out[i] = magnitude * np.exp(1j * phase)
        dphi = np.angle(c1) - np.angle(c0) - expected
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase = phase + expected + dphi
    return out


def _refix(samples: np.ndarray) -> np.ndarray:
    out = np.zeros(CLIP_SAMPLES)
    n = min(len(samples), CLIP_SAMPLES)
    out[:n] = samples[:n]
    return np.clip(out, -1.0, 1.0)


def time_stretch(clip: AudioClip, rate: float) -> AudioClip:
    """Change duration by 1/rate without changing pitch, then re-fix length."""
    if rate <= 0:
        raise ContractError(f"stretch rate must be > 0, got {rate}")
    stretched_len = int(round(len(clip) / rate))
    S = _stft_complex(clip.samples)
    y = _istft(_phase_vocoder(S, rate), length=stretched_len)
    return AudioClip(_refix(y))


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Scale pitch by 2^(semitones/12), preserving duration.

    Implemented as a phase-vocoder stretch to length*ratio followed by a
    linear-interpolation resample back to the original length.
    """
    if abs(semitones) > 12:
        raise ContractError(f"|semitones| must be <= 12, got {semitones}")
    ratio = 2.0 ** (semitones / 12.0)
    stretched_len = int(round(len(clip) * ratio))
    S = _stft_complex(clip.samples)
    stretched = _istft(_phase_vocoder(S, 1.0 / ratio), length=stretched_len)
    positions = np.arange(CLIP_SAMPLES) * ratio
    positions = positions[positions <= len(stretched) - 1]
    resampled = np.interp(positions, np.arange(len(stretched)), stretched)
    return AudioClip(_refix(resampled))


# ---------------------------------------------------------------------------
# Pink noise
# ---------------------------------------------------------------------------

def pink_noise(n: int, rng: np.random.Generator, n_rows: int = 16) -> np.ndarray:
    """Voss-McCartney pink noise, peak-normalized to 1.

    Row k holds Gaussian values held for 2^k samples; the sum of all rows
    has a ~1/f power spectrum (about -10 dB per decade).
    """
    total = np.zeros(n)
    for k in range(n_rows):
        period = 2**k
        values = rng.standard_normal(math.ceil(n / period))
        total += np.repeat(values, period)[:n]
    return total / np.max(np.abs(total))


def add_pink_noise(clip: AudioClip, factor: float, rng: np.random.Generator) -> AudioClip:
    """Add pink noise with peak amplitude `factor`; clamp to [-1, 1]."""
    if factor < 0:
        raise ContractError(f"noise factor must be >= 0, got {factor}")
    noise = pink_noise(len(clip), rng)
    return AudioClip(np.clip(clip.samples + factor * noise, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Spectrogram transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaskParams:
    """Drawn mask layout: per axis, a list of (width, start) pairs."""

    freq_masks: tuple
    time_masks: tuple


def mask_count_range(n_bands: int) -> tuple[int, int]:
    return 1, max(1, (2 * n_bands) // 8)


def mask_width_range(n_bands: int) -> tuple[int, int]:
    return 1, math.ceil(n_bands / 3)


def draw_mask_params(n_bands: int, rng: np.random.Generator) -> MaskParams:
    """Draw mask counts and widths uniformly from their documented ranges."""
    count_lo, count_hi = mask_count_range(n_bands)
    width_lo, width_hi = mask_width_range(n_bands)

    def axis() -> tuple:
        count = int(rng.integers(count_lo, count_hi + 1))
        masks = []
        for _ in range(count):
            width = int(rng.integers(width_lo, width_hi + 1))
            start = int(rng.integers(0, n_bands - width + 1))
            masks.append((width, start))
        return tuple(masks)

    return MaskParams(freq_masks=axis(), time_masks=axis())


def apply_mask_params(spec: MelSpectrogram, params: MaskParams) -> MelSpectrogram:
    values = spec.values.copy()
    for width, start in params.freq_masks:
        values[start : start + width, :] = DB_FLOOR
    for width, start in params.time_masks:
        values[:, start : start + width] = DB_FLOOR
    return MelSpectrogram(values, spec.n_bands)


def mask_spectrogram(spec: MelSpectrogram, rng: np.random.Generator) -> MelSpectrogram:
    """Zero-mask random frequency bands and time steps to the silence floor."""
    return apply_mask_params(spec, draw_mask_params(spec.n_bands, rng))


def warp_spectrogram(spec: MelSpectrogram, rng: np.random.Generator) -> MelSpectrogram:
    """Displace a random pivot column by up to max(1, n_bands//8) columns.

    The column axis is remapped by the piecewise-linear function fixing both
    endpoints and sending pivot -> pivot + displacement; columns are linearly
    interpolated.
    """
    n = spec.n_bands
    w_max = max(1, n // 8)
    pivot = int(rng.integers(w_max, n - w_max))  # uniform in [W, n-1-W]
    shift = int(rng.integers(-w_max, w_max + 1))
    target = min(max(pivot + shift, 1), n - 2)
    if target == pivot:
        return spec
    columns = np.arange(n, dtype=np.float64)
    source = np.where(
        columns <= target,
        columns * pivot / target,
        pivot + (columns - target) * (n - 1 - pivot) / (n - 1 - target),
    )
    low = np.floor(source).astype(int)
    high = np.minimum(low + 1, n - 1)
    frac = source - low
    values = spec.values[:, low] * (1.0 - frac) + spec.values[:, high] * frac
    return MelSpectrogram(values, n)


# ---------------------------------------------------------------------------
# Plans and dataset expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransformSpec:
    name: str
    params: dict = field(default_factory=dict)

    def tag(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class AugmentationPlan:
    """Ordered transform list + copy count + mandatory seed.

    Parameters outside the canonical sets ({-1,+1} semitones, {0.85,1.15}
    rates, {0.005,0.01} noise factors) need allow_override=True.
    """

    transforms: tuple
    rng_seed: int
    copies_per_transform: int = 1
    allow_override: bool = False

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if self.rng_seed is None:
            raise ConfigError("augmentation plan requires an explicit rng_seed")
        if self.copies_per_transform < 1:
            raise ConfigError("copies_per_transform must be >= 1")
        for spec in self.transforms:
            if spec.name not in WAVEFORM_TRANSFORMS + SPECTROGRAM_TRANSFORMS:
                raise ConfigError(f"unknown transform {spec.name!r}")
            if self.allow_override:
                continue
            if spec.name == "pitch_shift" and spec.params.get("semitones") not in PITCH_SEMITONE_CHOICES:
                raise ConfigError(
                    f"pitch_shift semitones must be one of {PITCH_SEMITONE_CHOICES} "
                    f"(got {spec.params.get('semitones')}); set allow_override to relax"
                )
            if spec.name == "time_stretch" and spec.params.get("rate") not in STRETCH_RATE_CHOICES:
                raise ConfigError(
                    f"time_stretch rate must be one of {STRETCH_RATE_CHOICES} "
                    f"(got {spec.params.get('rate')}); set allow_override to relax"
                )
            if spec.name == "add_noise" and spec.params.get("factor") not in NOISE_FACTOR_CHOICES:
                raise ConfigError(
                    f"add_noise factor must be one of {NOISE_FACTOR_CHOICES} "
                    f"(got {spec.params.get('factor')}); set allow_override to relax"
                )

    def domain(self) -> str:
        kinds = {
            "waveform" if s.name in WAVEFORM_TRANSFORMS else "spectrogram"
            for s in self.transforms
        }
        if len(kinds) > 1:
            raise ConfigError("plan mixes waveform and spectrogram transforms")
        return kinds.pop() if kinds else "empty"


def default_waveform_plan(seed: int) -> AugmentationPlan:
    """The six-variant plan: +-1 semitone, 0.85/1.15 stretch, two noise levels."""
    return AugmentationPlan(
        transforms=(
            TransformSpec("pitch_shift", {"semitones": -1.0}),
            TransformSpec("pitch_shift", {"semitones": 1.0}),
            TransformSpec("time_stretch", {"rate": 0.85}),
            TransformSpec("time_stretch", {"rate": 1.15}),
            TransformSpec("add_noise", {"factor": 0.005}),
            TransformSpec("add_noise", {"factor": 0.01}),
        ),
        rng_seed=seed,
    )


def default_spectrogram_plan(seed: int) -> AugmentationPlan:
    return AugmentationPlan(
        transforms=(TransformSpec("mask"), TransformSpec("warp")),
        rng_seed=seed,
    )


def plan_to_dict(plan: AugmentationPlan) -> dict:
    return {
        "transforms": [{"name": s.name, "params": dict(s.params)} for s in plan.transforms],
        "rng_seed": plan.rng_seed,
        "copies_per_transform": plan.copies_per_transform,
        "allow_override": plan.allow_override,
    }


def plan_from_dict(d: dict, default_seed: int = 0) -> AugmentationPlan:
    """Build a plan from its config-file form."""
    transforms = tuple(
        TransformSpec(t["name"], dict(t.get("params", {}))) for t in d.get("transforms", ())
    )
    return AugmentationPlan(
        transforms=transforms,
        rng_seed=d.get("rng_seed", default_seed),
        copies_per_transform=d.get("copies_per_transform", 1),
        allow_override=d.get("allow_override", False),
    )


@dataclass
class SpectrogramDataset:
    """Parallel to UtteranceDataset, but holding mel spectrograms."""

    specs: list
    labels: np.ndarray
    participant_id: str
    split: str
    provenance: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.provenance:
            self.provenance = ["original"] * len(self.specs)
        if len(self.specs) != len(self.labels) or len(self.specs) != len(self.provenance):
            raise ContractError("specs, labels and provenance must be parallel")

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def n_bands(self) -> int:
        return self.specs[0].n_bands if self.specs else 0


def _apply_waveform(spec: TransformSpec, clip: AudioClip, rng) -> AudioClip:
    if spec.name == "pitch_shift":
        return pitch_shift(clip, spec.params["semitones"])
    if spec.name == "time_stretch":
        return time_stretch(clip, spec.params["rate"])
    return add_pink_noise(clip, spec.params["factor"], rng)


def _apply_spectrogram(spec: TransformSpec, item: MelSpectrogram, rng) -> MelSpectrogram:
    if spec.name == "mask":
        return mask_spectrogram(item, rng)
    return warp_spectrogram(item, rng)


def expand_dataset(ds, plan: AugmentationPlan):
    """Append transformed variants of every item to a dataset.

    Originals keep their positions; variants follow, ordered by (original
    index, transform, copy). Deterministic given plan.rng_seed.
    """
    domain = plan.domain()
    if isinstance(ds, UtteranceDataset):
        if domain == "spectrogram":
            raise ConfigError("spectrogram transforms cannot run on a waveform dataset")
        items, apply_one = list(ds.clips), _apply_waveform
    elif isinstance(ds, SpectrogramDataset):
        if domain == "waveform":
            raise ConfigError("waveform transforms cannot run on a spectrogram dataset")
        items, apply_one = list(ds.specs), _apply_spectrogram
    else:
        raise ConfigError(f"cannot expand {type(ds).__name__}")

    new_items = list(items)
    new_labels = list(ds.labels)
    new_provenance = list(ds.provenance)
    for i, item in enumerate(items):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([plan.rng_seed, i]))
        )
        for spec in plan.transforms:
            for _ in range(plan.copies_per_transform):
                new_items.append(apply_one(spec, item, rng))
                new_labels.append(int(ds.labels[i]))
                new_provenance.append(f"augmented:{spec.tag()}")

    if isinstance(ds, UtteranceDataset):
        return UtteranceDataset(
            new_items, np.array(new_labels), ds.participant_id, ds.split, new_provenance
        )
    return SpectrogramDataset(
        new_items, np.array(new_labels), ds.participant_id, ds.split, new_provenance
    )
