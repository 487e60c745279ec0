"""Straight-line reference implementations used to cross-check the package.

Everything here is written the slow, obvious way on purpose: explicit DFT
matrices built from cos/sin, scalar triangle evaluation, direct cosine sums.
No calls into wordrec internals and no np.fft.
"""

import math

import numpy as np

PREEMPH = 0.98
LOG_FLOOR = 1e-10


def mel(f):
    return 2595.0 * math.log10(1.0 + f / 700.0)


def mel_inv(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def dft_mags(frame, fft_size):
    """|DFT| over the non-negative bins, via explicit cos/sin matrices."""
    x = np.zeros(fft_size)
    x[: len(frame)] = frame
    n = np.arange(fft_size)
    k = np.arange(fft_size // 2 + 1)
    angles = 2.0 * np.pi * np.outer(k, n) / fft_size
    real = np.cos(angles) @ x
    imag = -np.sin(angles) @ x
    return np.sqrt(real**2 + imag**2)


def hamming(length):
    n = np.arange(length)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * n / (length - 1))


def triangle(f, lo, mid, hi):
    if f <= lo or f >= hi:
        return 0.0
    if f <= mid:
        return (f - lo) / (mid - lo)
    return (hi - f) / (hi - mid)


def filterbank_edges(n_filters, f_min, f_max):
    m_lo, m_hi = mel(f_min), mel(f_max)
    step = (m_hi - m_lo) / (n_filters + 1)
    return [mel_inv(m_lo + i * step) for i in range(n_filters + 2)]


def filterbank_weights(n_filters, f_min, f_max, fft_size, rate):
    """Triangles sampled at bin centers, nearest-center bin forced to 1."""
    edges = filterbank_edges(n_filters, f_min, f_max)
    bin_hz = rate / fft_size
    n_bins = fft_size // 2 + 1
    weights = np.zeros((n_filters, n_bins))
    for k in range(n_filters):
        lo, mid, hi = edges[k], edges[k + 1], edges[k + 2]
        for b in range(n_bins):
            weights[k, b] = triangle(b * bin_hz, lo, mid, hi)
        weights[k, int(round(mid / bin_hz))] = 1.0
    return edges, weights


def mfcc_frame(samples, fft_size=512, rate=16000, n_filters=24, f_min=0.0, f_max=8000.0):
    """Pre-emphasis, Hamming, DFT, band energies, direct cosine sum."""
    emphasized = np.empty(len(samples))
    emphasized[0] = samples[0]
    for i in range(1, len(samples)):
        emphasized[i] = samples[i] - PREEMPH * samples[i - 1]
    windowed = emphasized * hamming(len(samples))
    power = dft_mags(windowed, fft_size) ** 2
    _, weights = filterbank_weights(n_filters, f_min, f_max, fft_size, rate)
    bin_hz = rate / fft_size
    energies = [float(np.sum(power * weights[k]) * bin_hz) for k in range(n_filters)]
    coeffs = np.zeros(n_filters)
    for n in range(1, n_filters + 1):
        total = 0.0
        for k in range(1, n_filters + 1):
            total += math.log(max(energies[k - 1], LOG_FLOOR)) * math.cos(
                n * (k - 0.5) * math.pi / n_filters
            )
        coeffs[n - 1] = total
    return coeffs


def centroids_frame(samples, fft_size=512, rate=16000, n_filters=24, f_min=0.0, f_max=8000.0):
    """Band-gated magnitude centroids of the raw (no pre-emphasis) frame."""
    windowed = samples * hamming(len(samples))
    mags = dft_mags(windowed, fft_size)
    edges = filterbank_edges(n_filters, f_min, f_max)
    bin_hz = rate / fft_size
    out = np.zeros(n_filters)
    for k in range(n_filters):
        lo, hi = edges[k], edges[k + 2]
        num = den = 0.0
        for b, m in enumerate(mags):
            f = b * bin_hz
            if lo < f < hi:
                num += f * m
                den += m
        out[k] = num / den if den >= 1e-12 else (lo + hi) / 2.0
    return out
