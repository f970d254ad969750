"""Waveform rendering of mixture plans.

Each utterance is convolved with its speaker's room impulse response and
added at its onset; a single background noise, tiled to the mixture length,
is then mixed in at a sampled SNR measured over active-speech samples.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import signal

from .corpus_io import Waveform, read_wav
from .sampling import make_rng
from .timeline import Annotation, MixturePlan, annotation_from_plan

log = logging.getLogger(__name__)

RENDER_STREAM = 0x52454E44  # substream key keeping render draws apart from plan draws


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(np.square(x)))) if x.size else 0.0


def onset_sample(onset: float, rate: int) -> int:
    """Round-half-up of onset * rate."""
    return int(math.floor(onset * rate + 0.5))


def convolve_rir(x: Waveform, rir: Waveform) -> Waveform:
    """Reverberate ``x``; output is cut to len(x) and rescaled to x's peak."""
    if x.sample_rate != rir.sample_rate:
        raise ValueError(f"sample rate mismatch: {x.sample_rate} vs {rir.sample_rate} Hz")
    y = signal.convolve(x.samples, rir.samples, mode="full")[: len(x)]
    peak_in = float(np.max(np.abs(x.samples))) if len(x) else 0.0
    peak_out = float(np.max(np.abs(y))) if len(x) else 0.0
    if peak_out > 0 and peak_out != peak_in:
        y = y * (peak_in / peak_out)
    return Waveform(y, x.sample_rate)


def tile(noise: np.ndarray, length: int) -> np.ndarray:
    if noise.size == 0:
        raise ValueError("empty noise signal")
    return np.resize(noise, length)


def mixing_scale(speech: np.ndarray, active: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    """Noise gain giving ``snr_db`` between speech and noise over active samples.

    ``noise`` must already span the same samples as ``speech``.
    """
    active = np.asarray(active, dtype=bool)
    if not active.any():
        active = np.ones_like(active)
    n_rms = _rms(noise[active])
    if n_rms == 0:
        raise ValueError("noise is silent over the active-speech region")
    return _rms(speech[active]) / (n_rms * 10.0 ** (snr_db / 20.0))


def measured_snr(speech: np.ndarray, scaled_noise: np.ndarray, active: np.ndarray) -> float:
    active = np.asarray(active, dtype=bool)
    return 20.0 * math.log10(_rms(speech[active]) / _rms(scaled_noise[active]))


@dataclass(frozen=True)
class RenderConfig:
    rirs: Sequence[Waveform] = ()
    noises: Sequence[Waveform] = ()
    snr_choices: Sequence[float] = (5.0, 10.0, 15.0, 20.0)
    sample_rate: int = 8000
    clipping: str = "rescale"

    def __post_init__(self):
        if not self.snr_choices:
            raise ValueError("snr_choices must not be empty")
        if self.clipping not in ("rescale", "clamp"):
            raise ValueError(f"unknown clipping policy {self.clipping!r}")
        for w in (*self.rirs, *self.noises):
            if w.sample_rate != self.sample_rate:
                raise ValueError(
                    f"sample rate mismatch: {w.sample_rate} Hz, expected {self.sample_rate} Hz")


def load_wav_dir(path) -> list[Waveform]:
    """All ``*.wav`` under ``path`` in sorted order."""
    files = sorted(Path(path).glob("*.wav"))
    if not files:
        raise FileNotFoundError(f"no WAV files in {path}")
    return [read_wav(f) for f in files]


class AudioStore:
    """utterance id -> waveform, read lazily from manifest paths."""

    def __init__(self, paths: Mapping[str, str]):
        self._paths = dict(paths)
        self._cache: dict[str, Waveform] = {}

    @classmethod
    def from_pool(cls, pool) -> "AudioStore":
        return cls({r.utterance_id: r.path for r in pool.records()})

    def __call__(self, utterance_id: str) -> Waveform:
        w = self._cache.get(utterance_id)
        if w is None:
            w = self._cache[utterance_id] = read_wav(self._paths[utterance_id])
        return w


@dataclass
class RenderResult:
    waveform: Waveform
    annotation: Annotation
    snr_db: float | None
    noise_scale: float
    rescaled_by: float
    clipped: int


def render_mixture(plan: MixturePlan, audio: Callable[[str], Waveform], config: RenderConfig,
                   seed: int) -> RenderResult:
    rate = config.sample_rate
    rng = make_rng(seed, RENDER_STREAM)
    speakers = sorted({p.speaker for p in plan.placements})
    rir_of = {}
    if config.rirs:
        for spk in speakers:
            rir_of[spk] = config.rirs[int(rng.integers(len(config.rirs)))]

    clips = []
    length = 0
    for p in plan.placements:
        w = audio(p.utterance_id)
        if w.sample_rate != rate:
            raise ValueError(f"{p.utterance_id}: sample rate {w.sample_rate} Hz, expected {rate} Hz")
        if p.speaker in rir_of:
            w = convolve_rir(w, rir_of[p.speaker])
        start = onset_sample(p.onset, rate)
        clips.append((start, w.samples))
        length = max(length, start + len(w))

    x = np.zeros(length)
    active = np.zeros(length, dtype=bool)
    for start, s in clips:
        x[start:start + s.size] += s
        active[start:start + s.size] = True

    snr = None
    scale = 0.0
    if config.noises:
        noise = config.noises[int(rng.integers(len(config.noises)))]
        snr = float(config.snr_choices[int(rng.integers(len(config.snr_choices)))])
        n = tile(noise.samples, length)
        scale = mixing_scale(x, active, n, snr)
        x = x + scale * n

    rescaled_by = 1.0
    clipped = 0
    peak = float(np.max(np.abs(x))) if length else 0.0
    if peak > 1.0:
        if config.clipping == "rescale":
            rescaled_by = 1.0 / peak
            x = x * rescaled_by
        else:
            clipped = int(np.count_nonzero(np.abs(x) > 1.0))
            x = np.clip(x, -1.0, 1.0)
    return RenderResult(Waveform(x, rate), annotation_from_plan(plan), snr, scale,
                        rescaled_by, clipped)
