"""Shared fixtures: tone factories and synthetic multi-tone word corpora."""

import csv

import numpy as np
import pytest

from wordrec.audio_io import SAMPLE_RATE_HZ, AudioBuffer, save_wav

# five "words", each a distinct multi-tone template (Hz)
WORD_TONES = {
    "kids": (300.0, 1400.0, 2600.0),
    "bags": (500.0, 1900.0, 3500.0),
    "store": (800.0, 2400.0, 4600.0),
    "station": (1100.0, 3000.0, 5800.0),
    "please": (650.0, 1650.0, 7200.0),
}


def make_tone(freq_hz, duration_s=1.0, amplitude=0.3, phase=0.0):
    t = np.arange(int(round(duration_s * SAMPLE_RATE_HZ))) / SAMPLE_RATE_HZ
    return AudioBuffer(
        samples=amplitude * np.sin(2 * np.pi * freq_hz * t + phase),
        sample_rate_hz=SAMPLE_RATE_HZ,
    )


def synth_word(word, rng):
    """One jittered utterance of a template word: tones + phase/level jitter."""
    duration_s = rng.uniform(0.85, 1.0)
    n = int(duration_s * SAMPLE_RATE_HZ)
    t = np.arange(n) / SAMPLE_RATE_HZ
    x = np.zeros(n)
    for f in WORD_TONES[word]:
        f_jittered = f * rng.uniform(0.98, 1.02)
        x += rng.uniform(0.6, 1.0) * np.sin(2 * np.pi * f_jittered * t + rng.uniform(0, 2 * np.pi))
    x *= rng.uniform(0.25, 0.45) / np.max(np.abs(x))
    x += 0.003 * rng.standard_normal(n)
    fade = np.minimum(1.0, np.minimum(t, t[::-1]) / 0.01)  # 10 ms ramps, no clicks
    return AudioBuffer(samples=x * fade, sample_rate_hz=SAMPLE_RATE_HZ)


def build_corpus(root, n_train, n_test, words=None, accent="arabic", seed=0, test_from_train=False):
    """Write a WAV corpus + manifest under `root`; returns the manifest path.

    With test_from_train=True the test rows reference the training WAVs, which
    gives a corpus a model can be overfit to and then scored 1.0 on.
    """
    words = list(WORD_TONES) if words is None else list(words)
    rng = np.random.default_rng(seed)
    wav_dir = root / "wavs"
    wav_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for word in words:
        for i in range(n_train):
            name = f"{word}_train_{i:03d}.wav"
            save_wav(wav_dir / name, synth_word(word, rng))
            rows.append([f"wavs/{name}", word, accent, "train"])
        for i in range(n_test):
            if test_from_train:
                rows.append([f"wavs/{word}_train_{i:03d}.wav", word, accent, "test"])
            else:
                name = f"{word}_test_{i:03d}.wav"
                save_wav(wav_dir / name, synth_word(word, rng))
                rows.append([f"wavs/{name}", word, accent, "test"])
    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "word", "accent", "split"])
        writer.writerows(rows)
    return manifest


@pytest.fixture(scope="session")
def corpus_factory(tmp_path_factory):
    def build(name, n_train, n_test, **kwargs):
        return build_corpus(tmp_path_factory.mktemp(name), n_train, n_test, **kwargs)

    return build
