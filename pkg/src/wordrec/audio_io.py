"""WAV loading/saving and dataset manifest ingestion.

Audio is pinned to 16 kHz mono 16-bit PCM; anything else is rejected rather
than resampled. Decoded samples are scaled by 1/32768 so the int16 range maps
onto [-1, 1).
"""

from __future__ import annotations

import csv
import wave
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import errors

SAMPLE_RATE_HZ = 16_000
BIT_DEPTH = 16
INT16_SCALE = 32768.0

MANIFEST_HEADER = ["path", "word", "accent", "split"]
VALID_SPLITS = ("train", "test")


@dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM samples in [-1, 1] with their sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples)))) if len(self) else 0.0


@dataclass(frozen=True)
class UtteranceRecord:
    path: Path
    word: str
    accent: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed manifest; vocabulary order defines the class-index mapping."""

    records: list[UtteranceRecord]
    vocabulary: list[str]
    accents: list[str]

    def class_index(self, word: str) -> int:
        return self.vocabulary.index(word)

    def select(self, accent: str | None = None, split: str | None = None) -> list[UtteranceRecord]:
        return [
            r for r in self.records
            if (accent is None or r.accent == accent) and (split is None or r.split == split)
        ]


def load_wav(path: str | Path) -> AudioBuffer:
    """Read a 16 kHz mono 16-bit PCM WAV file into an AudioBuffer.

    Raises UnsupportedFormat naming each offending property (channels,
    sample_rate, bit_depth), or CorruptFile for a malformed container.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            samp_width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise errors.UnsupportedFormat(f"{path}: format_code is not PCM ({exc})") from exc
        raise errors.CorruptFile(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise errors.CorruptFile(f"{path}: truncated WAV header") from exc

    bad = []
    if n_channels != 1:
        bad.append(f"channels={n_channels} (want 1)")
    if rate != SAMPLE_RATE_HZ:
        bad.append(f"sample_rate={rate} (want {SAMPLE_RATE_HZ})")
    if samp_width != BIT_DEPTH // 8:
        bad.append(f"bit_depth={8 * samp_width} (want {BIT_DEPTH})")
    if bad:
        raise errors.UnsupportedFormat(f"{path}: " + ", ".join(bad))

    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / INT16_SCALE
    return AudioBuffer(samples=samples, sample_rate_hz=rate)


def save_wav(path: str | Path, buf: AudioBuffer) -> None:
    """Write an AudioBuffer as 16-bit PCM, saturating at the int16 limits."""
    quantized = np.round(buf.samples * INT16_SCALE)
    quantized = np.clip(quantized, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(BIT_DEPTH // 8)
        wf.setframerate(buf.sample_rate_hz)
        wf.writeframes(quantized.tobytes())


def load_manifest(path: str | Path, vocabulary: list[str] | None = None) -> DatasetManifest:
    """Parse a `path,word,accent,split` CSV into a DatasetManifest.

    Audio paths are resolved relative to the manifest's directory and must
    exist. Within each accent, every word must have the same number of train
    rows and the same number of test rows. The vocabulary defaults to the
    sorted distinct words unless an explicit ordered list is given.
    """
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise errors.BadHeader(f"{path}: empty file, expected header {','.join(MANIFEST_HEADER)}")
        if header != MANIFEST_HEADER:
            raise errors.BadHeader(
                f"{path}: header {','.join(header)!r} != {','.join(MANIFEST_HEADER)!r}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise errors.BadHeader(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            rel, word, accent, split = (f.strip() for f in row)
            if split not in VALID_SPLITS:
                raise errors.UnknownSplit(f"{path}:{lineno}: split {split!r} not in {VALID_SPLITS}")
            if vocabulary is not None and word not in vocabulary:
                raise errors.UnknownWord(f"{path}:{lineno}: word {word!r} not in vocabulary")
            audio_path = (base / rel).resolve()
            if not audio_path.is_file():
                raise errors.MissingFile(f"{path}:{lineno}: audio file not found: {rel}")
            records.append(UtteranceRecord(path=audio_path, word=word, accent=accent, split=split))

    vocab = list(vocabulary) if vocabulary is not None else sorted({r.word for r in records})
    accents = sorted({r.accent for r in records})
    _check_balance(records, vocab, accents, path)
    return DatasetManifest(records=records, vocabulary=vocab, accents=accents)


def _check_balance(records, vocabulary, accents, path) -> None:
    counts = Counter((r.accent, r.split, r.word) for r in records)
    for accent in accents:
        for split in VALID_SPLITS:
            per_word = {w: counts.get((accent, split, w), 0) for w in vocabulary}
            if len(set(per_word.values())) > 1:
                raise errors.ImbalancedDataset(
                    f"{path}: accent {accent!r} {split} counts unequal across words: {per_word}"
                )
