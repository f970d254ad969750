"""Deterministic synthetic corpora for desk-scale runs and tests.

Utterances are band-limited noise bursts: white noise through a one-pole
low-pass whose coefficient differs per speaker, so speakers have distinct
spectral tilt. Durations follow an exponential distribution truncated to
[min_duration, max_duration], or a log-normal with the same mean clipped to
that range.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy import signal

from .corpus_io import Waveform, write_manifest, write_wav
from .sampling import make_rng, truncexp_icdf
from .timeline import UtteranceRecord

FADE_S = 0.005


def utterance_durations(rng, n: int, mean: float, lo: float, hi: float, rate: int,
                        shape: str = "exponential", sigma: float = 0.25) -> np.ndarray:
    if shape == "exponential":
        d = truncexp_icdf(rng.random(n), mean, lo, hi)
    elif shape == "lognormal":
        d = np.clip(rng.lognormal(math.log(mean) - sigma ** 2 / 2, sigma, n), lo, hi)
    else:
        raise ValueError(f"unknown duration shape {shape!r}")
    # durations are whole samples so labels and audio agree exactly
    return np.maximum(np.rint(d * rate), 1) / rate


def burst(rng, n: int, tilt: float, peak: float = 0.5, rate: int = 8000) -> np.ndarray:
    x = signal.lfilter([1.0 - tilt], [1.0, -tilt], rng.standard_normal(n))
    x *= peak / max(float(np.max(np.abs(x))), 1e-12)
    k = min(int(FADE_S * rate), n // 2)
    if k:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k) + 0.5) / k)
        x[:k] *= ramp
        x[n - k:] *= ramp[::-1]
    return x


def synth_pool(out_dir, n_speakers: int = 20, per_speaker: int = 50, mean: float = 3.0,
               min_duration: float = 0.3, max_duration: float = 10.0, sample_rate: int = 8000,
               seed: int = 0, write_audio: bool = True, shape: str = "exponential",
               sigma: float = 0.25) -> list[UtteranceRecord]:
    """Write ``manifest.jsonl`` (and ``wav/*.wav``) under ``out_dir``."""
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    records = []
    for s in range(n_speakers):
        rng = make_rng(seed, s)
        spk = f"spk{s:04d}"
        tilt = 0.1 + 0.85 * (s + 0.5) / n_speakers
        durations = utterance_durations(rng, per_speaker, mean, min_duration, max_duration,
                                        sample_rate, shape, sigma)
        for k, d in enumerate(durations):
            uid = f"{spk}-utt{k:04d}"
            rel = f"wav/{uid}.wav"
            if write_audio:
                n = int(round(d * sample_rate))
                write_wav(out / rel, Waveform(burst(rng, n, tilt, rate=sample_rate), sample_rate))
            records.append(UtteranceRecord(uid, spk, float(d), rel))
    write_manifest(out / "manifest.jsonl", records)
    return records


def synth_noises(out_dir, n: int = 4, seconds: float = 5.0, sample_rate: int = 8000,
                 seed: int = 0) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = make_rng(seed, 0x4E4F4953)
    for i in range(n):
        x = burst(rng, int(seconds * sample_rate), 0.2 + 0.15 * (i % 4), peak=0.3, rate=sample_rate)
        write_wav(out / f"noise{i:03d}.wav", Waveform(x, sample_rate))


def synth_rirs(out_dir, n: int = 4, rt60: float = 0.3, sample_rate: int = 8000,
               seed: int = 0) -> None:
    """Direct path at lag 0 plus an exponentially decaying diffuse tail."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = make_rng(seed, 0x524952)
    length = int(rt60 * sample_rate)
    t = np.arange(length) / sample_rate
    decay = np.exp(-6.9 * t / rt60)
    for i in range(n):
        h = 0.3 * rng.standard_normal(length) * decay
        h[0] = 1.0
        h /= max(float(np.max(np.abs(h))), 1.0)
        write_wav(out / f"rir{i:03d}.wav", Waveform(h * 0.99, sample_rate))


def expected_fraction_below(x: float, mean: float, lo: float, hi: float) -> float:
    """P(D < x) for the truncated exponential used by ``synth_pool``."""
    if x <= lo:
        return 0.0
    if x >= hi:
        return 1.0
    return math.expm1(-(x - lo) / mean) / math.expm1(-(hi - lo) / mean)
