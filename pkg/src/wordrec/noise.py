"""Noise sources and SNR-calibrated mixing.

The mixer scales a noise segment by g = (rms_clean / rms_noise) * 10^(-snr/20)
so the post-mix SNR measured on the actually-added component equals the target
exactly (up to float rounding). Segments from file-backed sources start at a
seeded random offset and loop circularly when shorter than the clean signal;
synthetic sources are generated at the needed length from the same seed.

Synthetic fixtures:
  white         Box-Muller Gaussian, sigma 0.1
  babble-like   white noise through a first-order lowpass magnitude shaping
  hfchannel-like white noise through the complementary highpass shaping
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import errors
from .audio_io import SAMPLE_RATE_HZ, AudioBuffer, load_wav

WHITE_SIGMA = 0.1
LOWPASS_CUTOFF_HZ = 500.0
HIGHPASS_CUTOFF_HZ = 2000.0

SYNTHETIC_SOURCES = ("white", "babble-like", "hfchannel-like")


@dataclass(frozen=True)
class NoiseSpec:
    """What to mix in: a synthetic source name or a WAV path, target SNR, seed."""

    source: str
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def synth_white(n_samples: int, seed: int, sigma: float = WHITE_SIGMA) -> AudioBuffer:
    """Gaussian noise via the Box-Muller transform on seeded uniforms."""
    rng = np.random.default_rng(seed)
    n_pairs = (n_samples + 1) // 2
    u1 = 1.0 - rng.random(n_pairs)  # (0, 1]: keeps the log finite
    u2 = rng.random(n_pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2 * np.pi * u2), radius * np.sin(2 * np.pi * u2)])
    return AudioBuffer(samples=sigma * z[:n_samples], sample_rate_hz=SAMPLE_RATE_HZ)


def _shaped_white(n_samples: int, seed: int, gain: np.ndarray) -> AudioBuffer:
    white = synth_white(n_samples, seed)
    spectrum = np.fft.rfft(white.samples)
    shaped = np.fft.irfft(spectrum * gain, n=n_samples)
    return AudioBuffer(samples=shaped, sample_rate_hz=SAMPLE_RATE_HZ)


def synth_lowpass(
    n_samples: int, seed: int, cutoff_hz: float = LOWPASS_CUTOFF_HZ
) -> AudioBuffer:
    """Low-frequency-weighted noise (speech-babble-like energy profile)."""
    f = np.fft.rfftfreq(n_samples, d=1.0 / SAMPLE_RATE_HZ)
    gain = 1.0 / np.sqrt(1.0 + (f / cutoff_hz) ** 2)
    return _shaped_white(n_samples, seed, gain)


def synth_highpass(
    n_samples: int, seed: int, cutoff_hz: float = HIGHPASS_CUTOFF_HZ
) -> AudioBuffer:
    """High-frequency-weighted noise (channel-hiss-like energy profile)."""
    f = np.fft.rfftfreq(n_samples, d=1.0 / SAMPLE_RATE_HZ)
    gain = (f / cutoff_hz) / np.sqrt(1.0 + (f / cutoff_hz) ** 2)
    return _shaped_white(n_samples, seed, gain)


def _source_samples(spec: NoiseSpec, n_samples: int) -> tuple[np.ndarray, bool]:
    """Raw noise samples and whether they came from a file (and so get cropped)."""
    if spec.source == "white":
        return synth_white(n_samples, spec.seed).samples, False
    if spec.source == "babble-like":
        return synth_lowpass(n_samples, spec.seed).samples, False
    if spec.source == "hfchannel-like":
        return synth_highpass(n_samples, spec.seed).samples, False
    path = Path(spec.source)
    if not path.exists():
        raise errors.MissingFile(f"noise source not found: {path}")
    return load_wav(path).samples, True


def mix_at_snr(
    clean: AudioBuffer, spec: NoiseSpec, return_noise: bool = False
) -> AudioBuffer | tuple[AudioBuffer, np.ndarray]:
    """Add noise at the target SNR; optionally also return the added component.

    The mixed signal is exactly clean + scaled_segment; no renormalization is
    applied afterwards, so the caller can recover and re-measure the noise.
    """
    rms_clean = clean.rms()
    if rms_clean == 0.0:
        raise errors.SilentClean("clean signal has zero RMS, SNR is undefined")
    n = len(clean)
    source, from_file = _source_samples(spec, n)
    if from_file:
        rng = np.random.default_rng(spec.seed)
        offset = int(rng.integers(0, len(source)))
        segment = source[(offset + np.arange(n)) % len(source)]
    else:
        segment = source
    rms_noise = float(np.sqrt(np.mean(segment**2)))
    if rms_noise == 0.0:
        raise errors.SilentNoise(f"noise segment from {spec.source!r} has zero RMS")
    gain = (rms_clean / rms_noise) * 10.0 ** (-spec.snr_db / 20.0)
    scaled = gain * segment
    mixed = AudioBuffer(samples=clean.samples + scaled, sample_rate_hz=clean.sample_rate_hz)
    if return_noise:
        return mixed, scaled
    return mixed
