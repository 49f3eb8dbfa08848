"""Feature-extraction oracles: naive DFT, moment statistics, functionals."""

import numpy as np
import pytest

from vocalperc.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, generate_synthetic
from vocalperc.dsp import (
    DB_FLOOR,
    DESC_HOP,
    DESC_WINDOW,
    FEATURE_NAMES,
    MEL_BAND_CHOICES,
    WINDOW_SAMPLES,
    MelSpectrogram,
    Standardizer,
    apply_functionals,
    apply_standardizer,
    descriptor_series,
    engineered_features,
    export_feature_csv,
    feature_matrix,
    filterbank_centers_hz,
    fit_standardizer,
    hz_to_mel,
    mel_filterbank,
    mel_spectrogram,
    mel_to_hz,
    stft_magnitude,
)
from vocalperc.errors import ConfigError, ContractError


def naive_dft_magnitude(x, n_fft):
    """O(N^2) DFT oracle, bins 0..n_fft/2."""
    x = np.asarray(x, dtype=np.float64)
    padded = np.zeros(n_fft)
    padded[: len(x)] = x
    n = np.arange(n_fft)
    bins = np.arange(n_fft // 2 + 1)
    basis = np.exp(-2j * np.pi * bins[:, None] * n[None, :] / n_fft)
    return np.abs(basis @ padded)


def sine_clip(freq, amplitude=1.0, n=CLIP_SAMPLES):
    t = np.arange(n) / SAMPLE_RATE
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t))


def _full_frames():
    """Descriptor frames entirely inside the 30000-sample clip."""
    return (CLIP_SAMPLES - DESC_WINDOW) // DESC_HOP + 1


class TestStft:
    def test_all_zero_clip(self):
        out = stft_magnitude(np.zeros(CLIP_SAMPLES), WINDOW_SAMPLES, 2500, 12)
        assert np.all(out == 0.0)

    def test_1khz_bin_mapping(self):
        # window 4233 -> FFT 8192; expected argmax bin round(1000*8192/44100)
        clip = sine_clip(1000.0)
        magnitude = stft_magnitude(clip.samples, 4233, 2500, 12)
        assert magnitude.shape[1] == 8192 // 2 + 1
        expected_bin = round(1000 * 8192 / 44100)
        assert expected_bin == 186
        assert np.all(magnitude.argmax(axis=1) == expected_bin)

    def test_matches_naive_dft(self):
        # acceptance: every size <= 128 within 1e-9 relative error
        rng = np.random.default_rng(3)
        for size in (2, 3, 7, 16, 33, 64, 100, 128):
            x = rng.standard_normal(size)
            mine = stft_magnitude(x, size, size, 1)[0]
            n_fft = 1
            while n_fft < size:
                n_fft *= 2
            oracle = naive_dft_magnitude(x * np.hanning(size), n_fft)
            scale = np.max(oracle) + 1e-30
            assert np.max(np.abs(mine - oracle)) / scale < 1e-9

    def test_parseval_per_frame(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(CLIP_SAMPLES) * 0.3
        window, hop, frames = 2048, 512, 4
        magnitude = stft_magnitude(x, window, hop, frames)
        hann = np.hanning(window)
        for k in range(frames):
            frame = x[k * hop : k * hop + window] * hann
            time_energy = np.sum(frame**2)
            m = magnitude[k]
            spectral = (m[0] ** 2 + m[-1] ** 2 + 2 * np.sum(m[1:-1] ** 2)) / window
            assert abs(time_energy - spectral) / time_energy < 1e-6


class TestMelFilterbank:
    def test_rows_nonnegative_single_peak(self):
        bank = mel_filterbank(4097, 16)
        for row in bank:
            assert np.all(row >= 0)
            assert row.max() == pytest.approx(1.0, abs=1e-9)
            peak = int(np.argmax(row))
            left = row[: peak + 1]
            right = row[peak:]
            assert np.all(np.diff(left) >= -1e-12)
            assert np.all(np.diff(right) <= 1e-12)

    def test_centers_monotone_in_hz(self):
        centers = filterbank_centers_hz(16)
        assert np.all(np.diff(centers) > 0)

    def test_first_center_below_300hz_from_mel_formula(self):
        # oracle: evaluate the mel spacing numerically
        top = hz_to_mel(SAMPLE_RATE / 2)
        center1 = mel_to_hz(top / 17.0)  # band 1 of 16 (edges at k*top/17)
        assert center1 < 300.0
        assert filterbank_centers_hz(16)[0] == pytest.approx(center1)

    def test_too_many_bands_is_config_error(self):
        with pytest.raises(ConfigError):
            mel_filterbank(9, 64)  # 16-point FFT cannot carry 64 bands

    def test_mel_roundtrip(self):
        freqs = np.array([0.0, 100.0, 1000.0, 8000.0, 22050.0])
        assert np.allclose(mel_to_hz(hz_to_mel(freqs)), freqs)


class TestMelSpectrogram:
    @pytest.mark.parametrize("n_bands", MEL_BAND_CHOICES)
    def test_square_and_hop(self, n_bands):
        clip = sine_clip(1500.0, 0.5)
        spec = mel_spectrogram(clip, n_bands)
        assert spec.values.shape == (n_bands, n_bands)
        assert spec.hop_samples == CLIP_SAMPLES // n_bands

    def test_12_bands_hop_2500(self):
        spec = mel_spectrogram(sine_clip(500.0), 12)
        assert spec.values.shape == (12, 12)
        assert spec.hop_samples == 2500

    def test_silent_clip_is_floor(self):
        spec = mel_spectrogram(AudioClip(np.zeros(CLIP_SAMPLES)), 12)
        assert np.allclose(spec.values, DB_FLOOR)
        assert DB_FLOOR == pytest.approx(-100.0)

    def test_5khz_band_argmax_matches_center_oracle(self):
        spec = mel_spectrogram(sine_clip(5000.0), 16)
        centers = filterbank_centers_hz(16)
        expected_band = int(np.argmin(np.abs(centers - 5000.0)))
        band_energy = spec.values.max(axis=1)
        assert int(np.argmax(band_energy)) == expected_band

    def test_gain_shifts_db_by_20log10(self):
        # entries well above the floor shift exactly; near the floor the
        # +1e-10 stabilizer caps how far values can fall, so exactness
        # only holds where signal power dominates it
        clip = sine_clip(800.0, 0.1)
        gained = AudioClip(clip.samples * 4.0)
        a = mel_spectrogram(clip, 12).values
        b = mel_spectrogram(gained, 12).values
        above = a > DB_FLOOR + 70.0
        assert above.sum() > 10
        shift = b[above] - a[above]
        assert np.allclose(shift, 20.0 * np.log10(4.0), atol=1e-6)

    def test_wrong_band_count_rejected(self):
        with pytest.raises(ConfigError):
            mel_spectrogram(sine_clip(500.0), 10)

    def test_non_fixed_length_rejected(self):
        with pytest.raises(ContractError):
            mel_spectrogram(AudioClip(np.zeros(1000)), 12)


class TestDescriptors:
    def test_shape_59_frames(self):
        series = descriptor_series(sine_clip(2000.0))
        assert series.shape == (20, int(np.ceil(CLIP_SAMPLES / DESC_HOP)))
        assert series.shape[1] == 59

    def test_dc_clip_zcr_zero(self):
        clip = AudioClip(np.full(CLIP_SAMPLES, 0.25))
        series = descriptor_series(clip)
        assert np.all(series[13] == 0.0)

    def test_alternating_signs_zcr_one(self):
        samples = 0.5 * (-1.0) ** np.arange(CLIP_SAMPLES)
        series = descriptor_series(AudioClip(samples))
        full = _full_frames()
        assert np.allclose(series[13][:full], 1.0)

    def test_tone_centroid_within_one_bin(self):
        # moment oracle: a pure 2 kHz tone concentrates spectral mass there;
        # zero-padded tail frames smear the spectrum and are excluded
        series = descriptor_series(sine_clip(2000.0))
        bin_width = SAMPLE_RATE / DESC_WINDOW
        centroid = series[14][: _full_frames()]
        assert np.all(np.abs(centroid - 2000.0) <= bin_width)

    def test_noise_flatter_than_tone_every_frame(self):
        rng = np.random.default_rng(0)
        noise = AudioClip(np.clip(rng.standard_normal(CLIP_SAMPLES) * 0.2, -1, 1))
        tone = sine_clip(3000.0)
        assert np.all(descriptor_series(noise)[18] > descriptor_series(tone)[18])

    def test_silent_frame_conventions(self):
        series = descriptor_series(AudioClip(np.zeros(CLIP_SAMPLES)))
        assert np.all(series[13] == 0)  # zcr
        for idx in (14, 15, 16, 17, 19):  # centroid..kurtosis, rolloff
            assert np.all(series[idx] == 0)
        assert np.all(series[18] == 1)  # flatness

    def test_gain_invariance_of_shape_descriptors(self):
        clip = sine_clip(1234.0, 0.1)
        gained = AudioClip(clip.samples * 3.0)
        a = descriptor_series(clip)
        b = descriptor_series(gained)
        for idx in range(13, 20):  # zcr + six spectral shape statistics
            assert np.allclose(a[idx], b[idx], atol=1e-9), FEATURE_NAMES[idx * 5]


class TestFunctionals:
    def test_constant_series(self):
        out = apply_functionals(np.full(10, 3.5))
        assert np.allclose(out, [3.5, 0.0, 3.5, 3.5, 0.0])

    def test_1234_fixture(self):
        # percentile oracle: P75 = 3.25, P25 = 1.75 under linear interpolation
        out = apply_functionals(np.array([1.0, 2.0, 3.0, 4.0]))
        assert out[0] == pytest.approx(2.5)
        assert out[1] == pytest.approx(np.sqrt(1.25))
        assert out[2] == 1.0 and out[3] == 4.0
        assert out[4] == pytest.approx(1.5)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        series = rng.standard_normal(40)
        shuffled = series[rng.permutation(40)]
        assert np.allclose(apply_functionals(series), apply_functionals(shuffled))

    def test_empty_series_rejected(self):
        with pytest.raises(ContractError):
            apply_functionals(np.array([]))


class TestEngineeredFeatures:
    def test_length_100(self):
        assert len(engineered_features(sine_clip(700.0))) == 100
        assert len(FEATURE_NAMES) == 100

    def test_descriptor_major_order(self):
        assert FEATURE_NAMES[0] == "mfcc1_mean"
        assert FEATURE_NAMES[4] == "mfcc1_iqr"
        assert FEATURE_NAMES[5] == "mfcc2_mean"
        assert FEATURE_NAMES[70] == "centroid_mean"
        assert FEATURE_NAMES[99] == "rolloff_iqr"

    def test_silent_clip_constant_series(self):
        features = engineered_features(AudioClip(np.zeros(CLIP_SAMPLES)))
        assert np.all(np.isfinite(features))
        # every descriptor is constant over frames: std and IQR vanish
        # (up to DCT float noise)
        assert np.allclose(features[1::5], 0.0, atol=1e-9)
        assert np.allclose(features[4::5], 0.0, atol=1e-9)

    def test_deterministic(self):
        clip = sine_clip(440.0, 0.4)
        assert np.array_equal(engineered_features(clip), engineered_features(clip))

    def test_matrix_stacks_rows(self):
        train, _ = generate_synthetic(2, 2)
        X = feature_matrix(train.clips)
        assert X.shape == (8, 100)


class TestStandardizer:
    def test_self_standardization(self):
        rng = np.random.default_rng(2)
        X = rng.normal(3.0, 2.5, size=(50, 7))
        s = fit_standardizer(X)
        Z = apply_standardizer(s, X)
        assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(Z.std(axis=0), 1.0, atol=1e-12)

    def test_constant_column_maps_to_zero(self):
        X = np.ones((10, 3))
        X[:, 1] = np.arange(10)
        s = fit_standardizer(X)
        Z = s(X)
        assert np.all(Z[:, 0] == 0.0)
        assert np.all(Z[:, 2] == 0.0)

    def test_affine_consistency(self):
        # brute-force check: standardizing a*x + b matches the closed form
        rng = np.random.default_rng(4)
        X = rng.standard_normal((30, 5))
        s = fit_standardizer(X)
        a, b = 2.5, -1.25
        expected = (a * X + b - s.mean) / s.std
        assert np.allclose(s(a * X + b), expected)

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            fit_standardizer(np.zeros((0, 4)))

    def test_csv_export_header(self, tmp_path):
        X = np.zeros((2, 100))
        path = tmp_path / "features.csv"
        export_feature_csv(path, X, labels=[0, 3])
        lines = path.read_text().splitlines()
        assert lines[0].startswith("label,mfcc1_mean,mfcc1_std")
        assert "centroid_mean" in lines[0]
        assert lines[1].startswith("0,")
        assert lines[2].startswith("3,")


class TestMelSpectrogramType:
    def test_requires_square(self):
        with pytest.raises(ContractError):
            MelSpectrogram(np.zeros((8, 12)), 8)

    def test_requires_finite(self):
        values = np.zeros((8, 8))
        values[0, 0] = np.nan
        with pytest.raises(ContractError):
            MelSpectrogram(values, 8)

    def test_standardizer_type_roundtrip(self):
        s = Standardizer(np.zeros(3), np.ones(3))
        assert np.allclose(s(np.ones((2, 3))), 1.0)
