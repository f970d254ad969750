"""Dataset realism statistics: silence/overlap ratios and EMD similarity.

Duration samples are kept in seconds. The similarity score converts them to
milliseconds before applying ``exp(-gamma * EMD)`` with ``gamma = 0.001``;
in seconds every similarity would round to 1.000.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .timeline import Annotation, speaker_count_intervals

DEFAULT_GAMMA = 0.001
MS_PER_S = 1000.0


@dataclass(frozen=True)
class SpeechTimes:
    """T(0 speakers), T(>=1) and T(>=2) in seconds."""

    silence: float
    speech: float
    overlap: float

    @property
    def extent(self) -> float:
        return self.silence + self.speech


def speech_times(a: Annotation) -> SpeechTimes:
    t0 = t1 = t2 = 0.0
    for lo, hi, c in speaker_count_intervals(a):
        d = hi - lo
        if c == 0:
            t0 += d
        else:
            t1 += d
            if c >= 2:
                t2 += d
    return SpeechTimes(t0, t1, t2)


def silence_ratio(a: Annotation) -> float:
    if not a.extent > 0:
        raise ValueError(f"{a.recording_id}: zero extent")
    t = speech_times(a)
    return t.silence / (t.silence + t.speech)


def overlap_ratio(a: Annotation) -> float:
    t = speech_times(a)
    if not t.speech > 0:
        raise ValueError(f"{a.recording_id}: no speech")
    return t.overlap / t.speech


def duration_samples(a: Annotation) -> tuple[list[float], list[float]]:
    """Lengths of internal silences and of overlap regions.

    Silences before the first onset and after the last offset are excluded.
    Consecutive regions with two or more speakers form one overlap sample.
    """
    silences, overlaps = [], []
    intervals = speaker_count_intervals(a)
    speech_idx = [i for i, (_, _, c) in enumerate(intervals) if c > 0]
    if not speech_idx:
        return silences, overlaps
    first, last = speech_idx[0], speech_idx[-1]
    run = 0.0
    for i, (lo, hi, c) in enumerate(intervals):
        if c >= 2:
            run += hi - lo
            continue
        if run > 0:
            overlaps.append(run)
            run = 0.0
        if c == 0 and first < i < last:
            silences.append(hi - lo)
    if run > 0:
        overlaps.append(run)
    return silences, overlaps


def emd_1d(u: Sequence[float], v: Sequence[float]) -> float:
    """Earth mover's distance between two empirical 1-D distributions (L1 ground cost)."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    v = np.sort(np.asarray(v, dtype=np.float64))
    if u.size == 0 or v.size == 0:
        raise ValueError("no samples")
    return _kernels.emd_sorted(u, v)


def similarity_from_emd(emd: float, gamma: float = DEFAULT_GAMMA) -> float:
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return math.exp(-gamma * emd)


def similarity_score(u: Sequence[float], v: Sequence[float], gamma: float = DEFAULT_GAMMA,
                     scale: float = MS_PER_S) -> float:
    """exp(-gamma * EMD) with EMD computed on ``scale``-multiplied samples (ms by default)."""
    return similarity_from_emd(emd_1d(u, v) * scale, gamma)


@dataclass
class DatasetStats:
    silence_ratio: float
    overlap_ratio: float
    silence_durations: np.ndarray
    overlap_durations: np.ndarray
    total_duration: float  # hours
    n_recordings: int = 0
    transition_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_recordings": self.n_recordings,
            "total_hours": self.total_duration,
            "silence_ratio": self.silence_ratio,
            "overlap_ratio": self.overlap_ratio,
            "n_silences": int(self.silence_durations.size),
            "n_overlaps": int(self.overlap_durations.size),
            "transition_counts": dict(self.transition_counts),
        }


def dataset_stats(annotations: Iterable[Annotation]) -> DatasetStats:
    """Pooled statistics; ratios are total-time ratios over all recordings."""
    t0 = t1 = t2 = 0.0
    sil, ovl = [], []
    n = 0
    for a in annotations:
        t = speech_times(a)
        t0 += t.silence
        t1 += t.speech
        t2 += t.overlap
        s, o = duration_samples(a)
        sil.extend(s)
        ovl.extend(o)
        n += 1
    if n == 0:
        raise ValueError("no annotations")
    total = t0 + t1
    return DatasetStats(
        silence_ratio=t0 / total if total > 0 else float("nan"),
        overlap_ratio=t2 / t1 if t1 > 0 else float("nan"),
        silence_durations=np.asarray(sil),
        overlap_durations=np.asarray(ovl),
        total_duration=total / 3600.0,
        n_recordings=n,
    )


def _similarity_or_none(u, v, gamma):
    if len(u) == 0 or len(v) == 0:
        return None, None
    emd_ms = emd_1d(u, v) * MS_PER_S
    return similarity_from_emd(emd_ms, gamma), emd_ms


def compare_datasets(a: DatasetStats, b: DatasetStats, gamma: float = DEFAULT_GAMMA) -> dict:
    """Ratios of both datasets and their silence/overlap similarities.

    A similarity is ``None`` when either side has no duration samples.
    """
    sil, emd_s = _similarity_or_none(a.silence_durations, b.silence_durations, gamma)
    ovl, emd_o = _similarity_or_none(a.overlap_durations, b.overlap_durations, gamma)
    return {
        "unit": "ms",
        "gamma": gamma,
        "silence_ratio_a": a.silence_ratio,
        "overlap_ratio_a": a.overlap_ratio,
        "silence_ratio_b": b.silence_ratio,
        "overlap_ratio_b": b.overlap_ratio,
        "silence_ratio_delta": b.silence_ratio - a.silence_ratio,
        "overlap_ratio_delta": b.overlap_ratio - a.overlap_ratio,
        "total_hours_a": a.total_duration,
        "total_hours_b": b.total_duration,
        "silence_similarity": sil,
        "overlap_similarity": ovl,
        "emd_silence_ms": emd_s,
        "emd_overlap_ms": emd_o,
    }


def format_report(report: dict, name_a: str = "A", name_b: str = "B") -> str:
    def f(x):
        return "   n/a" if x is None else f"{x:6.3f}"

    header = (f"{'Dataset':<12} {'Hours':>8} {'Silence':>8} {'Overlap':>8}"
              f" {'Sil.sim':>8} {'Ovl.sim':>8}")
    rows = [
        f"# EMD unit: {report['unit']}, gamma = {report['gamma']:g}",
        header,
        "-" * len(header),
        f"{name_a:<12} {report['total_hours_a']:8.3f} {f(report['silence_ratio_a']):>8}"
        f" {f(report['overlap_ratio_a']):>8} {f(1.0):>8} {f(1.0):>8}",
        f"{name_b:<12} {report['total_hours_b']:8.3f} {f(report['silence_ratio_b']):>8}"
        f" {f(report['overlap_ratio_b']):>8} {f(report['silence_similarity']):>8}"
        f" {f(report['overlap_similarity']):>8}",
    ]
    return "\n".join(rows) + "\n"
