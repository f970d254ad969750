"""Speaker-activity timelines, utterance inventories and simulation parameters.

All times are seconds as Python floats. Every type here is a frozen value
object.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels


class TransitionType(enum.IntEnum):
    """Relation between the latest-ending utterance and the next one.

    The integer value is the fixed row/column index used by ``p_ind`` and
    ``p_markov``.
    """

    TH = 0  # turn-hold: same speaker, pause
    TS = 1  # turn-switch: other speaker, gap
    IR = 2  # interruption: other speaker, partial overlap
    BC = 3  # backchannel: other speaker, fully overlapped

    @classmethod
    def parse(cls, name: str) -> "TransitionType":
        return cls[name.strip().upper()]


TYPE_ORDER = tuple(TransitionType)


@dataclass(frozen=True, order=True)
class TimedSegment:
    onset: float
    duration: float
    speaker: str

    def __post_init__(self):
        if not (self.onset >= 0 and math.isfinite(self.onset)):
            raise ValueError(f"segment onset must be >= 0, got {self.onset}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"segment duration must be > 0, got {self.duration}")

    @property
    def end(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class Annotation:
    recording_id: str
    segments: tuple[TimedSegment, ...]
    extent: float

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: (s.onset, s.speaker, s.duration)))
        object.__setattr__(self, "segments", segs)
        if segs:
            last = max(s.end for s in segs)
            if last > self.extent + 1e-9:
                raise ValueError(
                    f"{self.recording_id}: segment ends at {last} beyond extent {self.extent}"
                )
        if self.extent < 0:
            raise ValueError("extent must be >= 0")

    @classmethod
    def from_segments(cls, recording_id: str, segments: Iterable[TimedSegment],
                      extent: float | None = None) -> "Annotation":
        segments = tuple(segments)
        if extent is None:
            extent = max((s.end for s in segments), default=0.0)
        return cls(recording_id, segments, extent)

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({s.speaker for s in self.segments}))


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker: str
    duration: float
    path: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"utterance {self.utterance_id}: duration must be > 0")


@dataclass(frozen=True)
class UtterancePool:
    """Per-speaker utterance inventory (speaker -> records)."""

    by_speaker: Mapping[str, tuple[UtteranceRecord, ...]]

    def __post_init__(self):
        frozen = {spk: tuple(recs) for spk, recs in sorted(self.by_speaker.items())}
        seen = set()
        for spk, recs in frozen.items():
            if not recs:
                raise ValueError(f"speaker {spk} has no utterances")
            for r in recs:
                if r.utterance_id in seen:
                    raise ValueError(f"duplicate utterance id {r.utterance_id}")
                seen.add(r.utterance_id)
        object.__setattr__(self, "by_speaker", frozen)

    @classmethod
    def from_records(cls, records: Iterable[UtteranceRecord]) -> "UtterancePool":
        groups: dict[str, list[UtteranceRecord]] = {}
        for r in records:
            groups.setdefault(r.speaker, []).append(r)
        return cls(groups)

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(self.by_speaker)

    def __getitem__(self, speaker: str) -> tuple[UtteranceRecord, ...]:
        return self.by_speaker[speaker]

    def __len__(self) -> int:
        return sum(len(v) for v in self.by_speaker.values())

    def records(self):
        for recs in self.by_speaker.values():
            yield from recs


@dataclass(frozen=True)
class SimParams:
    """Knobs of the turn-taking simulator.

    ``beta`` holds (TH, TS, IR, BC): mean pause/gap in seconds for TH/TS and
    the truncated-exponential scale of the overlap ratio for IR/BC. A type
    that can never be drawn may carry ``None``. ``p_markov[i][j]`` is
    P(next = type i | current = type j), so columns sum to one.
    """

    beta: tuple[float | None, ...]
    p_ind: tuple[float, ...]
    p_markov: tuple[tuple[float, ...], ...] | None = None
    epsilon: float = 0.03
    mode: str = "random"
    n_spk: int = 2
    n_utt: int = 30
    snr_choices: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0)

    def __post_init__(self):
        if isinstance(self.beta, Mapping):
            object.__setattr__(self, "beta", tuple(
                self.beta.get(t, self.beta.get(t.name)) for t in TYPE_ORDER))
        object.__setattr__(self, "beta", tuple(None if b is None else float(b) for b in self.beta))
        object.__setattr__(self, "p_ind", tuple(float(p) for p in self.p_ind))
        if self.p_markov is not None:
            object.__setattr__(self, "p_markov",
                               tuple(tuple(float(x) for x in row) for row in self.p_markov))
        object.__setattr__(self, "snr_choices", tuple(float(s) for s in self.snr_choices))

    def beta_of(self, ttype: TransitionType) -> float:
        b = self.beta[ttype]
        if b is None:
            raise ValueError(f"beta for {ttype.name} is not set")
        return b

    @property
    def p_ind_array(self) -> np.ndarray:
        return np.asarray(self.p_ind, dtype=np.float64)

    @property
    def p_markov_array(self) -> np.ndarray | None:
        if self.p_markov is None:
            return None
        return np.asarray(self.p_markov, dtype=np.float64)

    def replace(self, **changes) -> "SimParams":
        from dataclasses import replace
        return replace(self, **changes)


def callhome1_params(n_utt: int = 30) -> SimParams:
    """Parameters estimated from the CALLHOME two-speaker adaptation split."""
    return SimParams(
        beta=(0.57, 0.40, 0.10, 0.44),
        p_ind=(0.15, 0.31, 0.44, 0.10),
        p_markov=(
            (0.26, 0.11, 0.09, 0.31),
            (0.23, 0.38, 0.29, 0.29),
            (0.27, 0.45, 0.53, 0.31),
            (0.24, 0.06, 0.09, 0.09),
        ),
        epsilon=0.03,
        mode="markov",
        n_spk=2,
        n_utt=n_utt,
        snr_choices=(5.0, 10.0, 15.0, 20.0),
    )


def _fmt(x: float) -> str:
    return f"{round(x, 6):g}"


def validate_params(p: SimParams) -> list[str]:
    """Return every violated invariant of ``p``; an empty list means valid."""
    problems = []
    if len(p.beta) != 4:
        problems.append(f"beta must have 4 entries, got {len(p.beta)}")
    if len(p.p_ind) != 4:
        problems.append(f"p_ind must have 4 entries, got {len(p.p_ind)}")
    if not 0 < p.epsilon < 0.5:
        problems.append(f"epsilon must lie in (0, 0.5), got {_fmt(p.epsilon)}")
    if p.mode not in ("random", "markov"):
        problems.append(f"mode must be 'random' or 'markov', got {p.mode!r}")
    if p.n_spk < 1:
        problems.append(f"n_spk must be >= 1, got {p.n_spk}")
    if p.n_utt < 1:
        problems.append(f"n_utt must be >= 1, got {p.n_utt}")

    if len(p.p_ind) == 4:
        if any(not (x >= 0) for x in p.p_ind):
            problems.append("p_ind has negative entries")
        s = sum(p.p_ind)
        if abs(s - 1.0) > 1e-9:
            problems.append(f"p_ind sums to {_fmt(s)}")

    reachable = [False] * 4
    if len(p.p_ind) == 4:
        reachable = [x > 0 for x in p.p_ind]
    if p.p_markov is not None:
        rows = p.p_markov
        if len(rows) != 4 or any(len(r) != 4 for r in rows):
            problems.append("p_markov must be 4x4")
        else:
            for j in range(4):
                col = [rows[i][j] for i in range(4)]
                if any(not (x >= 0) for x in col):
                    problems.append(f"p_markov column {j + 1} has negative entries")
                s = sum(col)
                if abs(s - 1.0) > 1e-9:
                    problems.append(
                        f"p_markov column {j + 1} sums to {_fmt(s)} "
                        f"(current state {TYPE_ORDER[j].name})")
            if p.mode == "markov":
                for i in range(4):
                    reachable[i] = reachable[i] or any(rows[i][j] > 0 for j in range(4))
    elif p.mode == "markov":
        problems.append("p_markov is required in markov mode")

    if len(p.beta) == 4:
        for t in TYPE_ORDER:
            b = p.beta[t]
            if b is None:
                if reachable[t]:
                    problems.append(f"beta {t.name} missing for a reachable transition type")
            elif not (b > 0 and math.isfinite(b)):
                problems.append(f"beta {t.name} must be > 0, got {_fmt(b)}")
    return problems


def check_params(p: SimParams) -> SimParams:
    problems = validate_params(p)
    if problems:
        raise ValueError("invalid SimParams: " + "; ".join(problems))
    return p


@dataclass(frozen=True)
class PlacedUtterance:
    utterance_id: str
    speaker: str
    onset: float
    duration: float
    transition: TransitionType | None = None

    @property
    def end(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class MixturePlan:
    mixture_id: str
    placements: tuple[PlacedUtterance, ...]
    params: SimParams | None = None
    seed: int = 0
    method: str = "proposed"
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def extent(self) -> float:
        return max((p.end for p in self.placements), default=0.0)


def annotation_from_plan(plan: MixturePlan) -> Annotation:
    if not plan.placements:
        raise ValueError("empty plan")
    segs = [TimedSegment(p.onset, p.duration, p.speaker) for p in plan.placements]
    return Annotation(plan.mixture_id, tuple(segs), plan.extent)


def speaker_count_intervals(a: Annotation) -> list[tuple[float, float, int]]:
    """Partition [0, extent] into maximal runs of constant active-speaker count."""
    codes = {spk: i for i, spk in enumerate(a.speakers)}
    n = len(a.segments)
    starts = np.fromiter((s.onset for s in a.segments), dtype=np.float64, count=n)
    ends = np.fromiter((s.end for s in a.segments), dtype=np.float64, count=n)
    spk = np.fromiter((codes[s.speaker] for s in a.segments), dtype=np.int64, count=n)
    lo, hi, cnt = _kernels.sweep(starts, ends, spk, max(len(codes), 1), a.extent)
    return [(float(x), float(y), int(c)) for x, y, c in zip(lo, hi, cnt)]


# Boundaries closer than this are treated as touching. RTTM stores 1 ms
# resolution, and onset + duration of parsed values is off by float rounding.
TIME_TOL = 1e-6


def merge_same_speaker(segments: Sequence[TimedSegment]) -> tuple[list[TimedSegment], int]:
    """Merge overlapping segments of one speaker; returns (segments, merges)."""
    by_spk: dict[str, list[TimedSegment]] = {}
    for s in sorted(segments, key=lambda s: (s.onset, s.speaker)):
        by_spk.setdefault(s.speaker, []).append(s)
    out = []
    merges = 0
    for spk, segs in by_spk.items():
        cur_on, cur_end = segs[0].onset, segs[0].end
        for s in segs[1:]:
            if s.onset < cur_end - TIME_TOL:
                cur_end = max(cur_end, s.end)
                merges += 1
            else:
                out.append(TimedSegment(cur_on, cur_end - cur_on, spk))
                cur_on, cur_end = s.onset, s.end
        out.append(TimedSegment(cur_on, cur_end - cur_on, spk))
    out.sort(key=lambda s: (s.onset, s.speaker))
    return out, merges
