"""Per-frame cepstral and frequency-centroid features and fixed-shape tensors.

Band energies integrate the power spectrum against the triangular filter
weights (Riemann sum over FFT bins). Cepstra are the cosine transform of the
floored log energies, index n = 1..K. Frequency centroids are the
magnitude-weighted mean frequency of each band, computed from the spectrum of
the raw (not pre-emphasized) frame with hard band gating rather than
triangular weighting.

Per-utterance features are packed into a rows x cols x channels tensor
(default 256 x 256), zero-padded beyond the valid frame/coefficient region
and truncated past `rows` frames. Tensors are stored float32 so file round
trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from . import errors
from .audio_io import AudioBuffer
from .dsp import FrameConfig, Spectrum, frame_signal, preemphasize
from .melbank import MelFilterbank

ENERGY_FLOOR = 1e-10
CENTROID_MASS_FLOOR = 1e-12
SIGMA_FLOOR = 1e-12

TENSOR_ROWS = 256
TENSOR_COLS = 256

FEATURE_MAGIC = b"FCF1"

FEATURE_SETS = ("mfcc", "fc", "both")


def band_energies(power_spectrum: Spectrum, fb: MelFilterbank) -> np.ndarray:
    """Filterbank outputs: sum of power * weight * bin_hz per band."""
    if power_spectrum.n_bins != fb.n_bins:
        raise errors.DimensionMismatch(
            f"spectrum has {power_spectrum.n_bins} bins, filterbank expects {fb.n_bins}"
        )
    return _band_energy_rows(power_spectrum.power[None, :], fb)[0]


def _band_energy_rows(power_rows: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    return (power_rows @ fb.weights.T) * fb.bin_hz


def mfcc(energies: np.ndarray) -> np.ndarray:
    """Cepstral coefficients of floored log band energies, index n = 1..K."""
    energies = np.asarray(energies, dtype=np.float64)
    return _cepstra_rows(energies[None, :])[0]


def _cosine_basis(n_bands: int) -> np.ndarray:
    # basis[n-1, k-1] = cos(n (k - 1/2) pi / K); the n = K row is identically 0
    n = np.arange(1, n_bands + 1)[:, None]
    k = np.arange(1, n_bands + 1)[None, :]
    return np.cos(n * (k - 0.5) * np.pi / n_bands)


def _cepstra_rows(energy_rows: np.ndarray) -> np.ndarray:
    log_e = np.log(np.maximum(energy_rows, ENERGY_FLOOR))
    return log_e @ _cosine_basis(energy_rows.shape[1]).T


def frequency_centroids(magnitude_spectrum: Spectrum, fb: MelFilterbank) -> np.ndarray:
    """Magnitude-weighted mean frequency per band, from the raw-frame spectrum.

    Bins strictly inside (lower edge, upper edge) contribute; a band with
    negligible total magnitude falls back to its mid-band frequency.
    """
    if magnitude_spectrum.n_bins != fb.n_bins:
        raise errors.DimensionMismatch(
            f"spectrum has {magnitude_spectrum.n_bins} bins, filterbank expects {fb.n_bins}"
        )
    return _centroid_rows(magnitude_spectrum.magnitudes[None, :], fb)[0]


def _centroid_rows(mag_rows: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    bin_freqs = np.arange(fb.n_bins) * fb.bin_hz
    lo = fb.edges_hz[:-2]
    hi = fb.edges_hz[2:]
    gate = (bin_freqs[None, :] > lo[:, None]) & (bin_freqs[None, :] < hi[:, None])
    mass = mag_rows @ gate.T
    moment = mag_rows @ (gate * bin_freqs[None, :]).T
    centroid = moment / np.maximum(mass, CENTROID_MASS_FLOOR)
    band_center = (lo + hi) / 2.0
    return np.where(mass < CENTROID_MASS_FLOOR, band_center[None, :], centroid)


@dataclass(frozen=True)
class FeatureTensor:
    """rows x cols x channels array; valid region is [:n_frames, :n_coeffs]."""

    data: np.ndarray
    channel_names: tuple[str, ...]
    n_frames: int
    n_coeffs: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def assemble_tensor(
    planes: list[np.ndarray],
    channel_names: list[str] | tuple[str, ...],
    rows: int = TENSOR_ROWS,
    cols: int = TENSOR_COLS,
) -> FeatureTensor:
    """Pack per-frame feature matrices into a fixed-shape zero-padded tensor.

    Each plane is (n_frames, K); frame t fills row t and coefficient j fills
    column j of its channel. Utterances longer than `rows` frames are
    truncated.
    """
    if len(planes) != len(channel_names) or not 1 <= len(planes) <= 2:
        raise ValueError("need one plane per channel name, with 1 or 2 channels")
    n_frames = planes[0].shape[0]
    n_coeffs = planes[0].shape[1]
    for p in planes:
        if p.shape != (n_frames, n_coeffs):
            raise errors.ShapeMismatch(f"channel planes disagree: {p.shape} vs {(n_frames, n_coeffs)}")
    if n_coeffs > cols:
        raise errors.TooManyCoefficients(f"{n_coeffs} coefficients exceed {cols} columns")
    kept = min(n_frames, rows)
    data = np.zeros((rows, cols, len(planes)), dtype=np.float32)
    for d, plane in enumerate(planes):
        data[:kept, :n_coeffs, d] = plane[:kept]
    return FeatureTensor(
        data=data, channel_names=tuple(channel_names), n_frames=kept, n_coeffs=n_coeffs
    )


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and standard deviation from training tensors."""

    channel_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {
            "channel_names": list(self.channel_names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelStats":
        return cls(
            channel_names=tuple(d["channel_names"]),
            mean=np.asarray(d["mean"], dtype=np.float64),
            std=np.asarray(d["std"], dtype=np.float64),
        )


def compute_stats(tensors: list[FeatureTensor]) -> ChannelStats:
    """Pool the valid regions of training tensors into per-channel mean/sigma."""
    if not tensors:
        raise errors.EmptyDataset("no tensors to compute statistics from")
    names = tensors[0].channel_names
    n_channels = tensors[0].data.shape[2]
    mean = np.zeros(n_channels)
    std = np.ones(n_channels)
    for d in range(n_channels):
        pooled = np.concatenate(
            [t.data[: t.n_frames, : t.n_coeffs, d].astype(np.float64).ravel() for t in tensors]
        )
        mean[d] = pooled.mean() if pooled.size else 0.0
        std[d] = pooled.std() if pooled.size else 1.0
    return ChannelStats(channel_names=names, mean=mean, std=std)


def normalize_tensor(tensor: FeatureTensor, stats: ChannelStats) -> FeatureTensor:
    """Z-normalize the valid region per channel; padding stays exactly zero."""
    if len(stats.mean) != tensor.data.shape[2]:
        raise errors.DimensionMismatch(
            f"stats cover {len(stats.mean)} channels, tensor has {tensor.data.shape[2]}"
        )
    data = tensor.data.copy()
    region = data[: tensor.n_frames, : tensor.n_coeffs, :].astype(np.float64)
    sigma = np.where(stats.std < SIGMA_FLOOR, 1.0, stats.std)
    region = (region - stats.mean[None, None, :]) / sigma[None, None, :]
    data[: tensor.n_frames, : tensor.n_coeffs, :] = region.astype(np.float32)
    return replace(tensor, data=data)


def write_features(path, tensor: FeatureTensor) -> None:
    """Serialize: magic, uint32 LE rows/cols/channels, float32 LE row-major payload."""
    rows, cols, channels = tensor.data.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", rows, cols, channels))
        fh.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def read_features(path, channel_names: tuple[str, ...] | None = None) -> FeatureTensor:
    """Load a feature file; the valid region is inferred from the zero padding."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURE_MAGIC:
            raise errors.BadMagic(f"{path}: expected {FEATURE_MAGIC!r}, found {magic!r}")
        header = fh.read(12)
        if len(header) != 12:
            raise errors.ShapeMismatch(f"{path}: truncated header")
        rows, cols, channels = struct.unpack("<III", header)
        payload = fh.read()
    expected = rows * cols * channels * 4
    if len(payload) != expected:
        raise errors.ShapeMismatch(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols, channels).copy()
    nz_rows, nz_cols, _ = np.nonzero(data)
    n_frames = int(nz_rows.max()) + 1 if nz_rows.size else 0
    n_coeffs = int(nz_cols.max()) + 1 if nz_cols.size else 0
    if channel_names is None:
        channel_names = tuple(f"ch{d}" for d in range(channels))
    return FeatureTensor(data=data, channel_names=channel_names, n_frames=n_frames, n_coeffs=n_coeffs)


def extract_tensor(
    signal: AudioBuffer,
    cfg: FrameConfig,
    fb: MelFilterbank,
    features: str = "both",
    rows: int = TENSOR_ROWS,
    cols: int = TENSOR_COLS,
) -> FeatureTensor:
    """Full per-utterance extraction into an unnormalized feature tensor.

    The cepstral channel runs on the pre-emphasized signal, the centroid
    channel on the raw signal; both share the framing, window, and FFT size.
    """
    if features not in FEATURE_SETS:
        raise ValueError(f"features must be one of {FEATURE_SETS}, got {features!r}")
    if fb.n_bins != cfg.fft_size // 2 + 1:
        raise errors.DimensionMismatch(
            f"filterbank has {fb.n_bins} bins, FFT size {cfg.fft_size} implies {cfg.fft_size // 2 + 1}"
        )
    planes = []
    names = []
    if features in ("mfcc", "both"):
        frames = frame_signal(preemphasize(signal, cfg.preemphasis_coeff), cfg)
        power = np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1)) ** 2
        planes.append(_cepstra_rows(_band_energy_rows(power, fb)))
        names.append("mfcc")
    if features in ("fc", "both"):
        frames = frame_signal(signal, cfg)
        mags = np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1))
        planes.append(_centroid_rows(mags, fb))
        names.append("fc")
    return assemble_tensor(planes, names, rows=rows, cols=cols)
