"""Perceptual frequency scale and triangular filterbank construction.

Band edges are spaced uniformly on the perceptual scale between f_min and
f_max. Each filter is a unit-height triangle rising from its lower edge to
its center and falling to its upper edge, linear in Hz. The sampled weight
matrix evaluates the triangles at FFT bin centers; the bin nearest each
center is assigned the full peak weight of 1.0 so that every row attains
its unit maximum on the bin grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors

MEL_BREAK_HZ = 700.0
MEL_SCALE = 2595.0


def hz_to_mel(f):
    """Perceptual value of a frequency in Hz: 2595 * log10(1 + f/700)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise errors.NegativeFrequency(f"frequency must be >= 0, got {f}")
    out = MEL_SCALE * np.log10(1.0 + f / MEL_BREAK_HZ)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(m):
    """Inverse of hz_to_mel: 700 * (10**(m/2595) - 1)."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise errors.NegativeMel(f"mel value must be >= 0, got {m}")
    out = MEL_BREAK_HZ * (10.0 ** (m / MEL_SCALE) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MelFilterbank:
    """K unit-peak triangular filters over the one-sided FFT bin grid."""

    edges_hz: np.ndarray  # K+2 band edges, strictly increasing
    weights: np.ndarray   # (K, fft_size//2 + 1) sampled filter weights
    bin_hz: float

    @property
    def n_filters(self) -> int:
        return len(self.edges_hz) - 2

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]

    def centers_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]

    def response(self, freqs) -> np.ndarray:
        """Continuous filter responses at arbitrary frequencies, shape (K, len(freqs)).

        This is the exact piecewise-linear triangle over the stored edges;
        adjacent filters crossfade to a total of exactly 1 between the first
        and last centers.
        """
        return _triangle_response(self.edges_hz, freqs)


def _triangle_response(edges_hz: np.ndarray, freqs) -> np.ndarray:
    f = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    lo = edges_hz[:-2, None]
    mid = edges_hz[1:-1, None]
    hi = edges_hz[2:, None]
    rising = (f[None, :] - lo) / (mid - lo)
    falling = (hi - f[None, :]) / (hi - mid)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def build_filterbank(
    n_filters: int = 24,
    f_min_hz: float = 0.0,
    f_max_hz: float = 8000.0,
    fft_size: int = 512,
    sample_rate_hz: int = 16_000,
) -> MelFilterbank:
    """Construct the triangular filterbank for a one-sided FFT bin grid."""
    if n_filters < 2:
        raise errors.TooFewFilters(f"need at least 2 filters, got {n_filters}")
    if not 0 <= f_min_hz < f_max_hz or f_max_hz > sample_rate_hz / 2:
        raise errors.InvalidRange(
            f"need 0 <= f_min < f_max <= Nyquist, got [{f_min_hz}, {f_max_hz}] at rate {sample_rate_hz}"
        )
    mel_edges = np.linspace(hz_to_mel(f_min_hz), hz_to_mel(f_max_hz), n_filters + 2)
    edges_hz = mel_to_hz(mel_edges)
    bin_hz = sample_rate_hz / fft_size
    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * bin_hz

    weights = _triangle_response(edges_hz, bin_freqs)

    # Pin the unit peak onto the bin grid; reject bands narrower than the grid.
    centers = edges_hz[1:-1]
    peak_bins = np.round(centers / bin_hz).astype(int)
    for k, b in enumerate(peak_bins):
        if b >= n_bins or not edges_hz[k] < bin_freqs[b] < edges_hz[k + 2]:
            raise errors.TooFewBins(
                f"filter {k + 1} band ({edges_hz[k]:.1f}, {edges_hz[k + 2]:.1f}) Hz "
                f"holds no usable {bin_hz:.2f} Hz bin"
            )
        weights[k, b] = 1.0

    return MelFilterbank(edges_hz=edges_hz, weights=weights, bin_hz=bin_hz)
