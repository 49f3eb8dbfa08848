"""Augmentation contracts: vocoder transforms, pink noise, masks, warps."""

import numpy as np
import pytest

from vocalperc.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, generate_synthetic
from vocalperc.augment import (
    AugmentationPlan,
    SpectrogramDataset,
    TransformSpec,
    add_pink_noise,
    apply_mask_params,
    default_spectrogram_plan,
    default_waveform_plan,
    draw_mask_params,
    expand_dataset,
    mask_count_range,
    mask_spectrogram,
    mask_width_range,
    pink_noise,
    pitch_shift,
    time_stretch,
    warp_spectrogram,
)
from vocalperc.dsp import DB_FLOOR, mel_spectrogram
from vocalperc.errors import ConfigError, ContractError


def sine_clip(freq, amplitude=0.5):
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t))


def dominant_hz(samples, n_fft=32768):
    spectrum = np.abs(np.fft.rfft(samples, n=n_fft))
    return np.fft.rfftfreq(n_fft, 1.0 / SAMPLE_RATE)[np.argmax(spectrum)], SAMPLE_RATE / n_fft


class TestPitchShift:
    def test_zero_semitones_identity(self):
        clip = sine_clip(440.0)
        out = pitch_shift(clip, 0.0)
        rms = np.sqrt(np.mean((out.samples - clip.samples) ** 2))
        assert rms < 1e-6

    def test_plus_one_semitone_peak(self):
        # 440 * 2^(1/12) = 466.16 Hz, within one FFT bin
        out = pitch_shift(sine_clip(440.0), 1.0)
        peak, bin_width = dominant_hz(out.samples)
        assert abs(peak - 440.0 * 2 ** (1 / 12)) <= bin_width

    def test_minus_one_semitone_peak(self):
        out = pitch_shift(sine_clip(440.0), -1.0)
        peak, bin_width = dominant_hz(out.samples)
        assert abs(peak - 440.0 * 2 ** (-1 / 12)) <= bin_width

    def test_output_length_fixed(self):
        rng = np.random.default_rng(0)
        for semitones in rng.uniform(-12, 12, size=6):
            out = pitch_shift(sine_clip(300.0), float(semitones))
            assert len(out) == CLIP_SAMPLES
            assert np.max(np.abs(out.samples)) <= 1.0

    def test_semitone_bound(self):
        with pytest.raises(ContractError):
            pitch_shift(sine_clip(440.0), 13.0)


class TestTimeStretch:
    def test_rate_one_identity(self):
        clip = sine_clip(440.0)
        out = time_stretch(clip, 1.0)
        assert np.sqrt(np.mean((out.samples - clip.samples) ** 2)) < 1e-6

    def test_prefix_length_arithmetic(self):
        # rate 1.15 -> pre-fix length round(30000/1.15) = 26087, padded back
        assert int(round(CLIP_SAMPLES / 1.15)) == 26087
        out = time_stretch(sine_clip(440.0), 1.15)
        assert len(out) == CLIP_SAMPLES
        tail = out.samples[27000:]
        assert np.max(np.abs(tail)) < 1e-9  # padding region is silent

    def test_pitch_preserved_at_085(self):
        out = time_stretch(sine_clip(440.0), 0.85)
        peak, bin_width = dominant_hz(out.samples)
        assert abs(peak - 440.0) <= max(bin_width, 0.01 * 440.0)

    def test_pitch_preserved_at_115(self):
        out = time_stretch(sine_clip(440.0), 1.15)
        peak, _ = dominant_hz(out.samples)
        assert abs(peak - 440.0) / 440.0 < 0.01

    def test_rate_must_be_positive(self):
        with pytest.raises(ContractError):
            time_stretch(sine_clip(440.0), 0.0)

    def test_stretch_then_shift_keeps_length(self):
        rng = np.random.default_rng(1)
        clip = sine_clip(500.0)
        for _ in range(4):
            s = float(rng.uniform(-3, 3))
            r = float(rng.uniform(0.7, 1.4))
            assert len(pitch_shift(time_stretch(clip, r), s)) == CLIP_SAMPLES


class TestPinkNoise:
    def test_factor_zero_identity(self):
        clip = sine_clip(440.0)
        out = add_pink_noise(clip, 0.0, np.random.default_rng(0))
        assert np.array_equal(out.samples, clip.samples)

    def test_peak_bound(self):
        clip = sine_clip(440.0, amplitude=0.3)
        for factor in (0.005, 0.01):
            out = add_pink_noise(clip, factor, np.random.default_rng(1))
            assert np.max(np.abs(out.samples - clip.samples)) <= factor + 1e-12

    def test_clamped_to_unit_range(self):
        clip = AudioClip(np.ones(CLIP_SAMPLES) * 0.9999)
        out = add_pink_noise(clip, 0.01, np.random.default_rng(2))
        assert np.max(out.samples) <= 1.0

    def test_spectral_slope_oracle(self):
        # least-squares fit on averaged periodograms over 100 Hz..10 kHz:
        # 1/f noise slopes at about -10 dB per decade
        rng = np.random.default_rng(3)
        n = CLIP_SAMPLES
        averaged = np.zeros(n // 2 + 1)
        reps = 40
        for _ in range(reps):
            x = pink_noise(n, rng)
            averaged += np.abs(np.fft.rfft(x)) ** 2 / n
        averaged /= reps
        freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
        band = (freqs >= 100.0) & (freqs <= 10_000.0)
        slope = np.polyfit(np.log10(freqs[band]), 10 * np.log10(averaged[band]), 1)[0]
        assert -12.0 <= slope <= -8.0

    def test_negative_factor_rejected(self):
        with pytest.raises(ContractError):
            add_pink_noise(sine_clip(100.0), -0.1, np.random.default_rng(0))


class TestMasks:
    @pytest.mark.parametrize(
        "n_bands,count_hi,width_hi", [(8, 2, 3), (12, 3, 4), (16, 4, 6)]
    )
    def test_documented_ranges(self, n_bands, count_hi, width_hi):
        assert mask_count_range(n_bands) == (1, count_hi)
        assert mask_width_range(n_bands) == (1, width_hi)

    @pytest.mark.parametrize("n_bands", [8, 12, 16])
    def test_draws_cover_ranges_exactly(self, n_bands):
        rng = np.random.default_rng(4)
        counts, widths = set(), set()
        _, count_hi = mask_count_range(n_bands)
        _, width_hi = mask_width_range(n_bands)
        for _ in range(10_000):
            params = draw_mask_params(n_bands, rng)
            for axis in (params.freq_masks, params.time_masks):
                counts.add(len(axis))
                for width, start in axis:
                    widths.add(width)
                    assert 1 <= width <= width_hi
                    assert 0 <= start <= n_bands - width
        assert counts == set(range(1, count_hi + 1))
        assert widths == set(range(1, width_hi + 1))

    def test_masked_entries_floor_others_untouched(self):
        spec = mel_spectrogram(sine_clip(2000.0), 12)
        rng = np.random.default_rng(5)
        params = draw_mask_params(12, rng)
        masked = apply_mask_params(spec, params)
        rows = set()
        for width, start in params.freq_masks:
            rows.update(range(start, start + width))
        cols = set()
        for width, start in params.time_masks:
            cols.update(range(start, start + width))
        for i in range(12):
            for j in range(12):
                if i in rows or j in cols:
                    assert masked.values[i, j] == DB_FLOOR
                else:
                    assert masked.values[i, j] == spec.values[i, j]

    def test_mask_spectrogram_smoke(self):
        spec = mel_spectrogram(sine_clip(2000.0), 8)
        out = mask_spectrogram(spec, np.random.default_rng(6))
        assert out.values.shape == (8, 8)


class TestWarp:
    def test_shape_preserved(self):
        spec = mel_spectrogram(sine_clip(1000.0), 16)
        out = warp_spectrogram(spec, np.random.default_rng(7))
        assert out.values.shape == (16, 16)

    def test_zero_displacement_identity(self):
        spec = mel_spectrogram(sine_clip(1000.0), 12)
        # find a seed whose displacement draw is 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            pivot = int(rng.integers(1, 11))
            shift = int(rng.integers(-1, 2))
            if shift == 0:
                out = warp_spectrogram(spec, np.random.default_rng(seed))
                assert np.array_equal(out.values, spec.values)
                return
        pytest.fail("no zero-displacement seed found in 50 tries")

    def test_interpolation_convexity_bound(self):
        spec = mel_spectrogram(sine_clip(3000.0), 12)
        out = warp_spectrogram(spec, np.random.default_rng(8))
        assert np.all(np.isfinite(out.values))
        assert out.values.min() >= spec.values.min() - 1e-9
        assert out.values.max() <= spec.values.max() + 1e-9


class TestPlansAndExpansion:
    def test_default_waveform_plan_expands_100_to_700(self):
        train, _ = generate_synthetic(7, 25)
        expanded = expand_dataset(train, default_waveform_plan(0))
        assert len(train) == 100
        assert len(expanded) == 700

    def test_empty_plan_is_identity(self):
        train, _ = generate_synthetic(7, 2)
        plan = AugmentationPlan(transforms=(), rng_seed=0)
        out = expand_dataset(train, plan)
        assert len(out) == len(train)
        for a, b in zip(out.clips, train.clips):
            assert np.array_equal(a.samples, b.samples)

    def test_deterministic_given_seed(self):
        train, _ = generate_synthetic(7, 3)
        plan = default_waveform_plan(9)
        a = expand_dataset(train, plan)
        b = expand_dataset(train, plan)
        for x, y in zip(a.clips, b.clips):
            assert np.array_equal(x.samples, y.samples)

    def test_labels_and_proportions_preserved(self):
        train, _ = generate_synthetic(7, 4)
        expanded = expand_dataset(train, default_waveform_plan(1))
        assert np.array_equal(
            expanded.class_counts(), train.class_counts() * 7
        )
        # originals keep their positions
        assert np.array_equal(expanded.labels[: len(train)], train.labels)

    def test_provenance_tags(self):
        train, _ = generate_synthetic(7, 1)
        expanded = expand_dataset(train, default_waveform_plan(1))
        assert expanded.provenance[: len(train)] == ["original"] * len(train)
        assert all(p.startswith("augmented:") for p in expanded.provenance[len(train):])
        assert any("pitch_shift" in p for p in expanded.provenance)
        assert any("add_noise" in p for p in expanded.provenance)

    def test_waveform_values_stay_bounded(self):
        train, _ = generate_synthetic(7, 2)
        expanded = expand_dataset(train, default_waveform_plan(2))
        for clip in expanded.clips:
            assert len(clip) == CLIP_SAMPLES
            assert np.max(np.abs(clip.samples)) <= 1.0

    def test_spectrogram_plan_on_waveform_dataset_rejected(self):
        train, _ = generate_synthetic(7, 1)
        with pytest.raises(ConfigError):
            expand_dataset(train, default_spectrogram_plan(0))

    def test_waveform_plan_on_spectrogram_dataset_rejected(self):
        train, _ = generate_synthetic(7, 1)
        specs = [mel_spectrogram(c, 8) for c in train.clips]
        ds = SpectrogramDataset(specs, train.labels, "p", "train")
        with pytest.raises(ConfigError):
            expand_dataset(ds, default_waveform_plan(0))

    def test_spectrogram_expansion(self):
        train, _ = generate_synthetic(7, 2)
        specs = [mel_spectrogram(c, 8) for c in train.clips]
        ds = SpectrogramDataset(specs, train.labels, "p", "train")
        out = expand_dataset(ds, default_spectrogram_plan(3))
        assert len(out) == len(ds) * 3  # originals + mask + warp

    def test_plan_requires_canonical_parameters(self):
        with pytest.raises(ConfigError):
            AugmentationPlan(
                transforms=(TransformSpec("pitch_shift", {"semitones": 2.0}),),
                rng_seed=0,
            )
        with pytest.raises(ConfigError):
            AugmentationPlan(
                transforms=(TransformSpec("time_stretch", {"rate": 0.5}),), rng_seed=0
            )
        with pytest.raises(ConfigError):
            AugmentationPlan(
                transforms=(TransformSpec("add_noise", {"factor": 0.5}),), rng_seed=0
            )
        # and the override flag relaxes exactly that
        plan = AugmentationPlan(
            transforms=(TransformSpec("pitch_shift", {"semitones": 2.0}),),
            rng_seed=0,
            allow_override=True,
        )
        assert plan.domain() == "waveform"

    def test_unknown_transform_rejected(self):
        with pytest.raises(ConfigError):
            AugmentationPlan(transforms=(TransformSpec("echo"),), rng_seed=0)

    def test_plan_config_roundtrip(self):
        from vocalperc.augment import plan_from_dict, plan_to_dict

        plan = default_waveform_plan(5)
        restored = plan_from_dict(plan_to_dict(plan))
        assert restored == plan
        custom = plan_from_dict(
            {
                "transforms": [
                    {"name": "pitch_shift", "params": {"semitones": 1.0}},
                    {"name": "add_noise", "params": {"factor": 0.005}},
                ],
                "copies_per_transform": 2,
            },
            default_seed=3,
        )
        assert custom.rng_seed == 3
        assert custom.copies_per_transform == 2
        train, _ = generate_synthetic(7, 2)
        assert len(expand_dataset(train, custom)) == 8 * (1 + 2 * 2)
