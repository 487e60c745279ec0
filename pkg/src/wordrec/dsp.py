"""Short-time analysis: pre-emphasis, framing, windowing, spectra.

Pre-emphasis is applied once over the whole utterance (boundary convention
s[-1] = 0), before framing. Trailing samples that do not fill a frame are
dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .audio_io import AudioBuffer

PREEMPHASIS_COEFF = 0.98


@dataclass(frozen=True)
class FrameConfig:
    frame_ms: float = 20.0
    shift_ms: float = 10.0
    fft_size: int = 512
    preemphasis_coeff: float = PREEMPHASIS_COEFF
    window: str = "hamming"

    def __post_init__(self):
        if not 0 < self.shift_ms <= self.frame_ms:
            raise ValueError(f"need 0 < shift_ms <= frame_ms, got {self.shift_ms}/{self.frame_ms}")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.window not in ("hamming", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")

    def frame_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.frame_ms * sample_rate_hz / 1000.0))

    def hop_samples(self, sample_rate_hz: int) -> int:
        return int(round(self.shift_ms * sample_rate_hz / 1000.0))

    def window_coeffs(self, length: int) -> np.ndarray:
        if self.window == "hamming":
            return np.hamming(length)
        return np.ones(length)


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude/power spectrum over fft_size/2 + 1 bins."""

    magnitudes: np.ndarray
    power: np.ndarray
    bin_hz: float

    @property
    def n_bins(self) -> int:
        return len(self.magnitudes)

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.bin_hz


def preemphasize(signal: AudioBuffer, coeff: float = PREEMPHASIS_COEFF) -> AudioBuffer:
    """First-difference high-pass: y[n] = x[n] - coeff * x[n-1], y[0] = x[0]."""
    x = signal.samples
    if len(x) == 0:
        raise errors.EmptySignal("cannot pre-emphasize an empty signal")
    y = np.empty_like(x, dtype=np.float64)
    y[0] = x[0]
    y[1:] = x[1:] - coeff * x[:-1]
    return AudioBuffer(samples=y, sample_rate_hz=signal.sample_rate_hz)


def frame_signal(signal: AudioBuffer, cfg: FrameConfig) -> np.ndarray:
    """Slice a signal into overlapping windowed frames, shape (n_frames, L).

    n_frames = floor((N - L) / H) + 1; a trailing partial frame is dropped.
    """
    x = signal.samples
    length = cfg.frame_samples(signal.sample_rate_hz)
    hop = cfg.hop_samples(signal.sample_rate_hz)
    if length > cfg.fft_size:
        raise errors.FrameTooLong(f"frame of {length} samples exceeds fft_size {cfg.fft_size}")
    if len(x) < length:
        raise errors.SignalTooShort(f"signal of {len(x)} samples is shorter than one {length}-sample frame")
    n_frames = (len(x) - length) // hop + 1
    idx = np.arange(length)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx] * cfg.window_coeffs(length)[None, :]


def spectrum(frame: np.ndarray, cfg: FrameConfig, sample_rate_hz: int) -> Spectrum:
    """Magnitude/power spectrum of one windowed frame, zero-padded to fft_size."""
    frame = np.asarray(frame, dtype=np.float64)
    if len(frame) > cfg.fft_size:
        raise errors.FrameTooLong(f"frame of {len(frame)} samples exceeds fft_size {cfg.fft_size}")
    mags = np.abs(np.fft.rfft(frame, n=cfg.fft_size))
    return Spectrum(magnitudes=mags, power=mags**2, bin_hz=sample_rate_hz / cfg.fft_size)
