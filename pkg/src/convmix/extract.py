"""Turn-taking statistics from annotations, and parameter estimation.

Classification replays the simulator's bookkeeping over real segments:
``prev`` is the segment with the latest end so far and only the part of it
that no other segment overlaps (its free span) enters the overlap ratio.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .sampling import truncexp_mean
from .timeline import (
    Annotation,
    SimParams,
    TransitionType,
    TIME_TOL,
    TYPE_ORDER,
    merge_same_speaker,
)

log = logging.getLogger(__name__)

TH, TS, IR, BC = TransitionType
BETA_MIN, BETA_MAX = 1e-4, 1e6


@dataclass(frozen=True)
class TransitionObservation:
    ttype: TransitionType
    value: float  # gap in seconds (TH/TS) or overlap ratio (IR/BC)


def classify_transitions(a: Annotation) -> list[TransitionObservation]:
    segs, merges = merge_same_speaker(a.segments)
    if merges:
        log.warning("%s: merged %d overlapping same-speaker segments", a.recording_id, merges)
    if not segs:
        return []
    out = []
    prev = segs[0]
    free_start = prev.onset
    for s in segs[1:]:
        end = prev.end
        if s.onset >= end - TIME_TOL:
            ttype = TH if s.speaker == prev.speaker else TS
            out.append(TransitionObservation(ttype, max(s.onset - end, 0.0)))
            prev, free_start = s, s.onset
            continue
        free = end - free_start
        denom = min(free, s.duration)
        overlap = min(s.end, end) - max(s.onset, free_start)
        rho = 1.0 if denom <= 0 else min(max(overlap, 0.0) / denom, 1.0)
        if s.end > end + TIME_TOL:
            out.append(TransitionObservation(IR, rho))
            prev, free_start = s, end
        else:
            out.append(TransitionObservation(BC, rho))
            free_start = min(max(free_start, s.end), end)
    return out


@dataclass
class TransitionStats:
    counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    # bigrams[i, j]: number of times type i followed type j
    bigrams: np.ndarray = field(default_factory=lambda: np.zeros((4, 4), dtype=np.int64))
    values: dict = field(default_factory=lambda: {t: [] for t in TYPE_ORDER})
    segments_per_recording: list = field(default_factory=list)
    speakers_per_recording: list = field(default_factory=list)


def collect(annotations: Iterable[Annotation]) -> TransitionStats:
    """Pool observations; bigrams never span two recordings."""
    st = TransitionStats()
    for a in annotations:
        obs = classify_transitions(a)
        st.segments_per_recording.append(len(obs) + 1 if a.segments else 0)
        st.speakers_per_recording.append(len(a.speakers))
        for k, o in enumerate(obs):
            st.counts[o.ttype] += 1
            st.values[o.ttype].append(o.value)
            if k:
                st.bigrams[o.ttype, obs[k - 1].ttype] += 1
    return st


def fit_overlap_scale(rhos: Sequence[float], epsilon: float) -> float:
    """Truncated-exponential scale whose mean matches the clamped sample mean."""
    lo, hi = epsilon, 1.0 - epsilon
    m = float(np.mean(np.clip(rhos, lo, hi)))
    f_lo = truncexp_mean(BETA_MIN, lo, hi)
    f_hi = truncexp_mean(BETA_MAX, lo, hi)
    if m <= f_lo:
        return BETA_MIN
    if m >= f_hi:
        return BETA_MAX
    return brentq(lambda b: truncexp_mean(b, lo, hi) - m, BETA_MIN, BETA_MAX, xtol=1e-12, rtol=1e-12)


def fit(stats: TransitionStats, mode: str = "markov", epsilon: float = 0.03,
        fallback_uniform: bool = False) -> tuple[SimParams, list[int]]:
    """Estimate SimParams; also returns the P_Markov columns filled by fallback."""
    total = int(stats.counts.sum())
    if total == 0:
        raise ValueError("no transitions observed")
    beta = [None] * 4
    for t in (TH, TS):
        if stats.counts[t]:
            beta[t] = max(float(np.mean(stats.values[t])), BETA_MIN)
    for t in (IR, BC):
        if stats.counts[t]:
            beta[t] = fit_overlap_scale(stats.values[t], epsilon)
    p_ind = stats.counts / total

    p_markov = None
    fallback = []
    if mode == "markov":
        cols = stats.bigrams.astype(np.float64)
        p = np.zeros((4, 4))
        for j in range(4):
            s = cols[:, j].sum()
            if s > 0:
                p[:, j] = cols[:, j] / s
            elif stats.counts[j] == 0:
                # never-visited state: the marginal keeps unseen types unreachable
                p[:, j] = p_ind
                fallback.append(j)
            elif fallback_uniform:
                # uniform over observed types only; unobserved ones have no beta
                seen = stats.counts > 0
                p[:, j] = seen / seen.sum()
                fallback.append(j)
            else:
                raise ValueError(
                    f"no transitions observed after {TYPE_ORDER[j].name}; "
                    "use a uniform fallback column")
        p_markov = tuple(map(tuple, p))

    n_utt = int(round(float(np.median(stats.segments_per_recording)))) or 1
    n_spk = int(round(float(np.median(stats.speakers_per_recording)))) or 1
    params = SimParams(beta=tuple(beta), p_ind=tuple(p_ind), p_markov=p_markov,
                       epsilon=epsilon, mode=mode, n_spk=n_spk, n_utt=n_utt)
    return params, fallback


def estimate_params(annotations: Iterable[Annotation], mode: str = "markov",
                    epsilon: float = 0.03, fallback_uniform: bool = False) -> SimParams:
    return fit(collect(annotations), mode, epsilon, fallback_uniform)[0]


def _mean_slope(beta: float, lo: float, hi: float) -> float:
    h = beta * 1e-5
    return (truncexp_mean(beta + h, lo, hi) - truncexp_mean(beta - h, lo, hi)) / (2 * h)


def diagnostics(stats: TransitionStats, params: SimParams, fallback: Sequence[int] = ()) -> dict:
    """Counts, bigram table and standard errors of the estimated scales."""
    se = {}
    lo, hi = params.epsilon, 1 - params.epsilon
    for t in TYPE_ORDER:
        vals = np.asarray(stats.values[t], dtype=np.float64)
        if vals.size < 2 or params.beta[t] is None:
            se[t.name] = None
            continue
        if t in (TH, TS):
            se[t.name] = float(vals.std(ddof=1) / math.sqrt(vals.size))
        else:
            se_mean = float(np.clip(vals, lo, hi).std(ddof=1) / math.sqrt(vals.size))
            slope = _mean_slope(params.beta[t], lo, hi)
            se[t.name] = se_mean / slope if slope > 0 else None
    return {
        "type_order": [t.name for t in TYPE_ORDER],
        "counts": {t.name: int(stats.counts[t]) for t in TYPE_ORDER},
        "bigrams_next_by_current": stats.bigrams.tolist(),
        "beta_standard_error": se,
        "fallback_columns": [TYPE_ORDER[j].name for j in fallback],
        "n_recordings": len(stats.segments_per_recording),
    }
