"""16-bit PCM WAV I/O, framing and time-axis normalization.

Amplitudes are scaled to [-1, 1) by dividing the raw integers by 32768.  The
time axis of sample ``i`` is ``i / rate_divisor`` (44100 by default, whatever
the file's own rate), standardized to zero mean and unit population standard
deviation over the analysed prefix.
"""

from __future__ import annotations

import csv
import wave
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import WavFormatError, WavTruncatedError

__all__ = [
    "AudioSignal", "Frame", "TimeNormalization",
    "load_wav_left", "write_wav", "compute_time_normalization",
    "segment_frames", "write_frames_csv", "DEFAULT_RATE_DIVISOR", "PCM_SCALE",
]

DEFAULT_RATE_DIVISOR = 44100.0
PCM_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSignal:
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=float).ravel()
        if not np.isfinite(samples).all():
            raise ValueError("samples must be finite")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Frame:
    start_index: int
    times: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return self.targets.size


@dataclass(frozen=True)
class TimeNormalization:
    rate_divisor: float
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError(f"std must be positive, got {self.std}")

    def apply(self, indices) -> np.ndarray:
        raw = np.asarray(indices, dtype=float) / self.rate_divisor
        return (raw - self.mean) / self.std


def load_wav_left(path) -> AudioSignal:
    """Read a 16-bit PCM mono or stereo WAV; stereo keeps channel 0."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise WavTruncatedError(f"{path}: header is truncated") from exc
    if width != 2:
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {8 * width}-bit samples; only 16-bit PCM is supported")
    if channels not in (1, 2):
        raise WavFormatError(f"{path}: 'fmt ' chunk declares {channels} channels; expected 1 or 2")
    expected = n_frames * channels * width
    if len(raw) < expected:
        raise WavTruncatedError(f"{path}: 'data' chunk holds {len(raw)} of {expected} bytes")
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, channels)
    return AudioSignal(rate, pcm[:, 0] / PCM_SCALE)


def write_wav(signal: AudioSignal, path) -> int:
    """Write a 16-bit PCM mono WAV.

    Samples outside [-1, 1] are clamped and counted (a warning is issued);
    the count is returned.  Full scale +1.0 is stored as 32767.
    """
    s = signal.samples
    n_clamped = int(np.count_nonzero(np.abs(s) > 1.0))
    if n_clamped:
        warnings.warn(f"{n_clamped} samples outside [-1, 1] were clamped", RuntimeWarning, stacklevel=2)
    pcm = np.clip(np.round(s * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(signal.sample_rate)
        wf.writeframes(pcm.tobytes())
    return n_clamped


def compute_time_normalization(n_samples: int, rate_divisor: float = DEFAULT_RATE_DIVISOR) -> TimeNormalization:
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    raw = np.arange(n_samples) / rate_divisor
    return TimeNormalization(float(rate_divisor), float(raw.mean()), float(raw.std()))


def segment_frames(
    signal: AudioSignal,
    norm: TimeNormalization,
    n_frames: int,
    frame_len: int = 1000,
    per_frame: bool = False,
) -> list[Frame]:
    """Cut the first ``n_frames * frame_len`` samples into consecutive frames.

    Times come from ``norm`` evaluated at the absolute sample index.  With
    ``per_frame`` each frame's raw times are standardized on their own
    instead (``norm`` then only supplies the rate divisor).
    """
    if n_frames < 1 or frame_len < 1:
        raise ValueError("n_frames and frame_len must be positive")
    needed = n_frames * frame_len
    if needed > len(signal):
        raise ValueError(
            f"{n_frames} frames of {frame_len} samples need {needed} samples, signal has {len(signal)}"
        )
    if per_frame and frame_len < 2:
        raise ValueError("per-frame normalization needs frame_len >= 2")
    frames = []
    for k in range(n_frames):
        start = k * frame_len
        idx = np.arange(start, start + frame_len)
        if per_frame:
            raw = idx / norm.rate_divisor
            times = (raw - raw.mean()) / raw.std()
        else:
            times = norm.apply(idx)
        frames.append(Frame(start, times, signal.samples[start:start + frame_len].copy()))
    return frames


def write_frames_csv(frames: Sequence[Frame], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_index", "time", "target"])
        for fr in frames:
            for t, y in zip(fr.times, fr.targets):
                w.writerow([fr.start_index, format(t, ".17g"), format(y, ".17g")])
