"""Audio and annotation I/O, onset segmentation, and a seeded synthetic dataset.

Everything downstream works on fixed-length mono clips: 30000 samples at
44100 Hz (0.68 s), cut from longer recordings at annotated onsets.

Participant directory layout::

    <participant>/
        kick.wav       kick.csv        # ~25 isolated utterances per class
        snare.wav      snare.csv
        hh_closed.wav  hh_closed.csv
        hh_opened.wav  hh_opened.csv
        improv.wav     improv.csv      # mixed-class test recording
        label_map.csv                  # optional alias,canonical remap

Onset CSVs are plain two-column text ("seconds,label"), '#' starts a comment
line. Class-file CSVs may omit the label column (the label is implied by the
filename); improv.csv must carry it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ContractError, ParseError, UnsupportedFormatError

SAMPLE_RATE = 44100
CLIP_SAMPLES = 30000  # 0.68 s at 44100 Hz
CLASS_NAMES = ("kick", "snare", "hh_closed", "hh_opened")
CLASS_IDS = {name: i for i, name in enumerate(CLASS_NAMES)}


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer at a fixed rate. Immutable after construction."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1).copy()
        if self.sample_rate != SAMPLE_RATE:
            raise ContractError(
                f"sample_rate must be {SAMPLE_RATE}, got {self.sample_rate}"
            )
        if not np.all(np.isfinite(samples)):
            raise ContractError("clip contains non-finite samples")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class OnsetAnnotation:
    """One annotated event: time in seconds plus (optionally) its class."""

    onset_time: float
    label: str | None = None

    def __post_init__(self):
        if self.onset_time < 0:
            raise ContractError(f"onset_time must be >= 0, got {self.onset_time}")
        if self.label is not None and self.label not in CLASS_IDS:
            raise ContractError(f"unknown label {self.label!r}")


@dataclass
class UtteranceDataset:
    """Labeled fixed-length clips for one participant and split."""

    clips: list[AudioClip]
    labels: np.ndarray
    participant_id: str
    split: str
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.provenance:
            self.provenance = ["original"] * len(self.clips)
        if len(self.clips) != len(self.labels) or len(self.clips) != len(self.provenance):
            raise ContractError("clips, labels and provenance must be parallel")
        if self.split not in ("train", "test"):
            raise ContractError(f"split must be train or test, got {self.split!r}")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() > 3):
            raise ContractError("class ids must lie in 0..3")
        for i, clip in enumerate(self.clips):
            if len(clip) != CLIP_SAMPLES:
                raise ContractError(
                    f"clip {i} has {len(clip)} samples, expected {CLIP_SAMPLES}"
                )

    def __len__(self) -> int:
        return len(self.clips)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=4)


def fix_length(samples: np.ndarray, n: int = CLIP_SAMPLES) -> np.ndarray:
    """Trim or zero-pad a 1-D array to exactly n samples."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if len(samples) >= n:
        return samples[:n].copy()
    out = np.zeros(n)
    out[: len(samples)] = samples
    return out


# ---------------------------------------------------------------------------
# WAV read/write (RIFF, PCM 16-bit or IEEE float 32-bit, 44100 Hz)
# ---------------------------------------------------------------------------

def read_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono AudioClip.

    Stereo is averaged to mono; 16-bit PCM is scaled by 1/32768. Only
    44100 Hz, PCM16 or float32 files are accepted.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise ParseError(f"{path}: truncated RIFF header at byte offset {len(data)}")
    if data[0:4] != b"RIFF":
        raise ParseError(f"{path}: not a RIFF file (bad magic at byte offset 0)")
    if data[8:12] != b"WAVE":
        raise ParseError(f"{path}: not a WAVE file (bad form type at byte offset 8)")

    fmt = None
    raw = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        if body_start + size > len(data):
            raise ParseError(
                f"{path}: truncated {chunk_id.decode('latin1').strip()!r} chunk "
                f"at byte offset {body_start} (need {size} bytes, have "
                f"{len(data) - body_start})"
            )
        if chunk_id == b"fmt ":
            if size < 16:
                raise ParseError(f"{path}: fmt chunk too short at byte offset {offset}")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            raw = data[body_start : body_start + size]
        offset = body_start + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise ParseError(f"{path}: missing fmt chunk")
    if raw is None:
        raise ParseError(f"{path}: missing data chunk")

    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format not in (1, 3):
        raise UnsupportedFormatError(
            f"{path}: unsupported format: audio_format (got {audio_format}, "
            f"need PCM=1 or IEEE float=3)"
        )
    if sample_rate != SAMPLE_RATE:
        raise UnsupportedFormatError(
            f"{path}: unsupported format: sample_rate (got {sample_rate}, "
            f"need {SAMPLE_RATE})"
        )
    if channels not in (1, 2):
        raise UnsupportedFormatError(
            f"{path}: unsupported format: channels (got {channels}, need 1 or 2)"
        )
    if audio_format == 1 and bits != 16:
        raise UnsupportedFormatError(
            f"{path}: unsupported format: bits_per_sample (got {bits}, need 16 "
            f"for PCM)"
        )
    if audio_format == 3 and bits != 32:
        raise UnsupportedFormatError(
            f"{path}: unsupported format: bits_per_sample (got {bits}, need 32 "
            f"for IEEE float)"
        )

    if audio_format == 1:
        frames = np.frombuffer(raw[: len(raw) - len(raw) % (2 * channels)], dtype="<i2")
        samples = frames.astype(np.float64) / 32768.0
    else:
        frames = np.frombuffer(raw[: len(raw) - len(raw) % (4 * channels)], dtype="<f4")
        samples = np.clip(frames.astype(np.float64), -1.0, 1.0)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as mono PCM 16-bit, round-half-away-from-zero quantized."""
    x = clip.samples
    q = np.sign(x) * np.floor(np.abs(x) * 32768.0 + 0.5)
    q = np.clip(q, -32768, 32767).astype("<i2")
    raw = q.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(raw)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, 1, SAMPLE_RATE, SAMPLE_RATE * 2, 2, 16
    )
    header += b"data" + struct.pack("<I", len(raw))
    Path(path).write_bytes(header + raw)


# ---------------------------------------------------------------------------
# Onset CSV parsing
# ---------------------------------------------------------------------------

def read_onset_csv(path, require_labels: bool, label_map: dict[str, str] | None = None):
    """Parse a "seconds,label" CSV into a list of OnsetAnnotation.

    Row numbers in errors are 1-based physical line numbers. Labels are
    remapped through label_map (alias -> canonical) before validation.
    """
    path = Path(path)
    label_map = label_map or {}
    annotations: list[OnsetAnnotation] = []
    prev_time = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split(",")]
        try:
            onset_time = float(parts[0])
        except ValueError:
            raise ParseError(
                f"{path.name}: bad onset time {parts[0]!r} at row {lineno}"
            ) from None
        if onset_time < 0:
            raise ParseError(f"{path.name}: negative onset time at row {lineno}")
        if prev_time is not None and onset_time <= prev_time:
            raise ParseError(
                f"{path.name}: onset times must be strictly increasing "
                f"(row {lineno})"
            )
        prev_time = onset_time
        label = None
        if len(parts) > 1 and parts[1]:
            label = label_map.get(parts[1], parts[1])
            if label not in CLASS_IDS:
                raise ParseError(
                    f"{path.name}: unknown label '{parts[1]}' at row {lineno}"
                )
        elif require_labels:
            raise ParseError(f"{path.name}: missing label at row {lineno}")
        annotations.append(OnsetAnnotation(onset_time, label))
    return annotations


def read_label_map(path) -> dict[str, str]:
    """Parse an optional alias,canonical remap table for nonstandard spellings."""
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if len(parts) != 2 or parts[1] not in CLASS_IDS:
            raise ParseError(
                f"{Path(path).name}: bad remap entry at row {lineno} "
                f"(need alias,canonical)"
            )
        mapping[parts[0]] = parts[1]
    return mapping


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def segment_by_onsets(clip: AudioClip, annotations) -> list[tuple[AudioClip, str | None]]:
    """Cut one fixed-length segment per annotation.

    Each segment starts at round(onset * 44100) and runs for 30000 samples,
    but is cut early at the next onset (then zero-padded) so the following
    utterance cannot leak into it.
    """
    starts = [int(round(a.onset_time * clip.sample_rate)) for a in annotations]
    for i, (a, start) in enumerate(zip(annotations, starts)):
        if a.onset_time >= clip.duration or start >= len(clip):
            raise ContractError(
                f"annotation {i} (t={a.onset_time}s) is beyond the end of the "
                f"file ({clip.duration:.3f}s)"
            )
    segments = []
    for i, (a, start) in enumerate(zip(annotations, starts)):
        end = start + CLIP_SAMPLES
        if i + 1 < len(starts):
            end = min(end, starts[i + 1])
        end = min(end, len(clip))
        segments.append((AudioClip(fix_length(clip.samples[start:end])), a.label))
    return segments


# ---------------------------------------------------------------------------
# Participant loading
# ---------------------------------------------------------------------------

def load_participant(directory) -> tuple[UtteranceDataset, UtteranceDataset]:
    """Load one participant directory into (train, test) datasets.

    Train labels come from the class filenames; test labels from improv.csv.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"participant directory not found: {directory}")

    label_map = {}
    map_path = directory / "label_map.csv"
    if map_path.exists():
        label_map = read_label_map(map_path)

    train_clips: list[AudioClip] = []
    train_labels: list[int] = []
    for name in CLASS_NAMES:
        wav_path = directory / f"{name}.wav"
        csv_path = directory / f"{name}.csv"
        for p in (wav_path, csv_path):
            if not p.exists():
                raise ParseError(f"missing file: {p}")
        clip = read_wav(wav_path)
        annotations = read_onset_csv(csv_path, require_labels=False, label_map=label_map)
        for segment, _ in segment_by_onsets(clip, annotations):
            train_clips.append(segment)
            train_labels.append(CLASS_IDS[name])

    improv_wav = directory / "improv.wav"
    improv_csv = directory / "improv.csv"
    for p in (improv_wav, improv_csv):
        if not p.exists():
            raise ParseError(f"missing file: {p}")
    improv = read_wav(improv_wav)
    annotations = read_onset_csv(improv_csv, require_labels=True, label_map=label_map)
    test_clips: list[AudioClip] = []
    test_labels: list[int] = []
    for segment, label in segment_by_onsets(improv, annotations):
        test_clips.append(segment)
        test_labels.append(CLASS_IDS[label])

    pid = directory.name
    train = UtteranceDataset(train_clips, np.array(train_labels), pid, "train")
    test = UtteranceDataset(test_clips, np.array(test_labels), pid, "test")
    return train, test


def write_participant_dir(directory, train: UtteranceDataset, test: UtteranceDataset) -> None:
    """Write datasets back out in the participant directory layout.

    Utterances are placed exactly CLIP_SAMPLES apart so that re-loading
    recovers them sample-for-sample (modulo 16-bit quantization).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spacing = CLIP_SAMPLES / SAMPLE_RATE
    for class_id, name in enumerate(CLASS_NAMES):
        clips = [c for c, y in zip(train.clips, train.labels) if y == class_id]
        buffer = np.concatenate([c.samples for c in clips]) if clips else np.zeros(0)
        write_wav(directory / f"{name}.wav", AudioClip(buffer))
        lines = [f"{i * spacing:.6f},{name}" for i in range(len(clips))]
        (directory / f"{name}.csv").write_text("\n".join(lines) + "\n")
    buffer = (
        np.concatenate([c.samples for c in test.clips]) if len(test) else np.zeros(0)
    )
    write_wav(directory / "improv.wav", AudioClip(buffer))
    lines = [
        f"{i * spacing:.6f},{CLASS_NAMES[y]}" for i, y in enumerate(test.labels)
    ]
    (directory / "improv.csv").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Synthetic dataset
# ---------------------------------------------------------------------------

def _one_pole_highpass(x: np.ndarray, cutoff_hz: float) -> np.ndarray:
    # y[n] = a*(y[n-1] + x[n] - x[n-1]),  a = RC/(RC + dt)
    a = 1.0 / (1.0 + 2.0 * np.pi * cutoff_hz / SAMPLE_RATE)
    return lfilter([a, -a], [1.0, -a], x)


def _synth_clip(class_id: int, rng: np.random.Generator) -> np.ndarray:
    """One synthetic utterance; per-utterance jitter comes from rng."""
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE

    def jitter() -> float:
        return rng.uniform(0.9, 1.1)

    if class_id == 0:  # kick: 120 -> 60 Hz sweep over 150 ms, exp decay
        f_hi = 120.0 * jitter()
        f_lo = 60.0 * jitter()
        tau = 0.060 * jitter()
        sweep_len = 0.150
        freq = np.where(t < sweep_len, f_hi + (f_lo - f_hi) * t / sweep_len, f_lo)
        phase = 2.0 * np.pi * np.cumsum(freq) / SAMPLE_RATE
        x = np.sin(phase) * np.exp(-t / tau)
    elif class_id == 1:  # snare: 200 Hz tone + white noise burst, mixed 1:1
        f0 = 200.0 * jitter()
        tau_tone = 0.040 * jitter()
        tau_noise = 0.080 * jitter()
        tone = np.sin(2.0 * np.pi * f0 * t) * np.exp(-t / tau_tone)
        noise = rng.standard_normal(CLIP_SAMPLES) * np.exp(-t / tau_noise)
        x = 0.5 * (tone / np.max(np.abs(tone)) + noise / np.max(np.abs(noise)))
    else:  # hi-hats: high-passed white noise, short vs long decay
        cutoff = 6000.0 * jitter()
        tau = (0.030 if class_id == 2 else 0.250) * jitter()
        noise = _one_pole_highpass(rng.standard_normal(CLIP_SAMPLES), cutoff)
        x = noise * np.exp(-t / tau)

    gain_db = rng.uniform(-3.0, 3.0)
    x = x / np.max(np.abs(x)) * 0.6 * 10.0 ** (gain_db / 20.0)
    return np.clip(x, -1.0, 1.0)


def generate_synthetic(
    seed: int, n_per_class: int, participant_id: str = "synth"
) -> tuple[UtteranceDataset, UtteranceDataset]:
    """Deterministic four-class synthetic dataset standing in for recordings.

    Train and test splits use independent jitter streams; the test split's
    clip order is shuffled, mimicking a mixed-class improvisation.
    """
    if n_per_class < 1:
        raise ContractError(f"n_per_class must be >= 1, got {n_per_class}")

    def make_split(stream_id: int, split: str) -> UtteranceDataset:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream_id])))
        clips, labels = [], []
        for class_id in range(4):
            for _ in range(n_per_class):
                clips.append(AudioClip(_synth_clip(class_id, rng)))
                labels.append(class_id)
        if split == "test":
            order = rng.permutation(len(clips))
            clips = [clips[i] for i in order]
            labels = [labels[i] for i in order]
        return UtteranceDataset(clips, np.array(labels), participant_id, split)

    return make_split(0, "train"), make_split(1, "test")
