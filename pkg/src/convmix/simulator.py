"""Label-level conversation construction.

``simulate_plan`` arranges utterances one at a time, choosing how each new
utterance relates to ``prev`` (the arranged utterance with the latest end
time): turn-hold, turn-switch, interruption or backchannel.
``concat_and_sum_plan`` is the conventional baseline where every speaker's
utterances are chained independently and the channels are summed.

Only placements are produced here; waveforms are rendered by
:mod:`convmix.render`.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .sampling import make_rng, next_transition, sample_exponential, sample_truncated_exponential
from .timeline import (
    MixturePlan,
    PlacedUtterance,
    SimParams,
    TransitionType,
    UtterancePool,
    UtteranceRecord,
    check_params,
)

TH, TS, IR, BC = TransitionType
MAX_BC_TRIES = 10


class PoolExhaustedError(RuntimeError):
    def __init__(self, speaker: str):
        super().__init__(f"speaker {speaker} has no unused utterances left in this mixture")
        self.speaker = speaker


@dataclass(frozen=True)
class SimState:
    """Bookkeeping between placement steps.

    ``free_start`` marks where the trailing part of ``prev`` that no other
    utterance overlaps begins; that part spans [free_start, prev.end].
    """

    prev: PlacedUtterance
    free_start: float
    last_type: TransitionType | None = None

    @property
    def timeline_end(self) -> float:
        return self.prev.end

    @property
    def speaker(self) -> str:
        return self.prev.speaker

    @property
    def free_span(self) -> float:
        return self.prev.end - self.free_start

    @classmethod
    def start(cls, first: PlacedUtterance) -> "SimState":
        return cls(prev=first, free_start=first.onset)


def place_after(state: SimState, u_next: UtteranceRecord, speaker: str, gap: float,
                ttype: TransitionType) -> tuple[SimState, PlacedUtterance]:
    """TH/TS: start ``gap`` seconds after the current timeline end."""
    placed = PlacedUtterance(u_next.utterance_id, speaker, state.timeline_end + gap,
                             u_next.duration, ttype)
    return SimState(prev=placed, free_start=placed.onset, last_type=ttype), placed


def place_interruption(state: SimState, u_next: UtteranceRecord, speaker: str,
                       rho: float) -> tuple[SimState, PlacedUtterance]:
    """IR: overlap the tail of ``prev`` by rho * min(free span, |u_next|)."""
    delta = rho * min(state.free_span, u_next.duration)
    placed = PlacedUtterance(u_next.utterance_id, speaker, state.timeline_end - delta,
                             u_next.duration, IR)
    # the overlapped head of the new utterance is not part of its free span
    free_start = max(state.timeline_end, placed.onset)
    return SimState(prev=placed, free_start=free_start, last_type=IR), placed


def place_backchannel(state: SimState, u_next: UtteranceRecord, speaker: str,
                      position: float) -> tuple[SimState, PlacedUtterance]:
    """BC: put ``u_next`` inside the free span of ``prev``.

    ``position`` in [0, 1] selects the onset linearly between the earliest and
    latest start that keep the backchannel inside the span. ``prev`` is kept;
    its free span shrinks to the part after the backchannel.
    """
    slack = state.free_span - u_next.duration
    if slack < 0:
        raise ValueError(
            f"backchannel longer than free span ({u_next.duration:.3f} s > {state.free_span:.3f} s)")
    onset = state.free_start + position * slack
    placed = PlacedUtterance(u_next.utterance_id, speaker, onset, u_next.duration, BC)
    free_start = min(max(state.free_start, placed.end), state.prev.end)
    return SimState(prev=state.prev, free_start=free_start, last_type=BC), placed


def apply_transition(state: SimState, ttype: TransitionType, u_next: UtteranceRecord,
                     next_speaker: str, rng: np.random.Generator,
                     params: SimParams) -> tuple[SimState, PlacedUtterance]:
    if ttype == TH:
        if next_speaker != state.speaker:
            raise ValueError("turn-hold must keep the speaker of the previous utterance")
    elif next_speaker == state.speaker:
        raise ValueError(f"{ttype.name} needs a speaker other than {state.speaker}")

    if ttype in (TH, TS):
        gap = sample_exponential(params.beta_of(ttype), rng)
        return place_after(state, u_next, next_speaker, gap, ttype)
    if ttype == IR:
        rho = sample_truncated_exponential(params.beta_of(IR), params.epsilon, rng)
        return place_interruption(state, u_next, next_speaker, rho)
    if u_next.duration > state.free_span:
        raise ValueError("backchannel longer than free span")
    return place_backchannel(state, u_next, next_speaker, rng.random())


class _Remaining:
    """Unused utterances per speaker; draws remove without replacement."""

    def __init__(self, pool: UtterancePool, speakers: Sequence[str]):
        self._left = {s: list(pool[s]) for s in speakers}

    def take(self, speaker: str, rng: np.random.Generator) -> UtteranceRecord:
        left = self._left[speaker]
        if not left:
            raise PoolExhaustedError(speaker)
        return self._pop(left, int(rng.integers(len(left))))

    def take_fitting(self, speaker: str, span: float, rng: np.random.Generator,
                     tries: int) -> UtteranceRecord | None:
        left = self._left[speaker]
        if not left:
            raise PoolExhaustedError(speaker)
        for i in rng.choice(len(left), size=min(tries, len(left)), replace=False):
            if left[i].duration <= span:
                return self._pop(left, int(i))
        return None

    @staticmethod
    def _pop(left: list, i: int) -> UtteranceRecord:
        left[i], left[-1] = left[-1], left[i]
        return left.pop()


def simulate_plan(pool: UtterancePool, params: SimParams, seed: int,
                  mixture_id: str = "mix", max_bc_tries: int = MAX_BC_TRIES) -> MixturePlan:
    """Arrange ``params.n_utt`` utterances into one conversation.

    Speakers other than the current one are drawn uniformly for TS/IR/BC.
    A drawn backchannel for which none of ``max_bc_tries`` candidate
    utterances fits the free span is placed as an interruption instead, and
    recorded as such.
    """
    check_params(params)
    speakers = pool.speakers
    if len(speakers) < params.n_spk:
        raise ValueError(f"pool has {len(speakers)} speakers, need {params.n_spk}")
    rng = make_rng(seed)
    chosen = [speakers[i] for i in rng.choice(len(speakers), size=params.n_spk, replace=False)]
    remaining = _Remaining(pool, chosen)

    first_spk = chosen[int(rng.integers(len(chosen)))]
    rec = remaining.take(first_spk, rng)
    first = PlacedUtterance(rec.utterance_id, first_spk, 0.0, rec.duration, None)
    placements = [first]
    state = SimState.start(first)
    single = len(chosen) == 1

    for _ in range(1, params.n_utt):
        ttype = next_transition(params.mode, state.last_type, params, rng, single_speaker=single)
        if ttype == TH:
            spk = state.speaker
        else:
            others = [s for s in chosen if s != state.speaker]
            spk = others[int(rng.integers(len(others)))]
        rec = None
        if ttype == BC:
            rec = remaining.take_fitting(spk, state.free_span, rng, max_bc_tries)
            if rec is None:
                ttype = IR
        if rec is None:
            rec = remaining.take(spk, rng)
        state, placed = apply_transition(state, ttype, rec, spk, rng, params)
        placements.append(placed)

    return MixturePlan(mixture_id, tuple(placements), params, int(seed), "proposed",
                       {"speakers": tuple(chosen)})


def concat_and_sum_plan(per_speaker: Mapping[str, Sequence[UtteranceRecord]], beta: float,
                        seed: int, mixture_id: str = "mix") -> MixturePlan:
    """Baseline: per speaker, chain utterances from t=0 with Exp(beta) silences."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    rng = make_rng(seed)
    placements = []
    for spk, recs in per_speaker.items():
        if not recs:
            raise ValueError(f"speaker {spk} has no utterances")
        t = 0.0
        for k, rec in enumerate(recs):
            if k:
                t += sample_exponential(beta, rng)
            placements.append(PlacedUtterance(rec.utterance_id, spk, t, rec.duration, None))
            t += rec.duration
    return MixturePlan(mixture_id, tuple(placements), None, int(seed), "concat-sum",
                       {"beta": float(beta), "speakers": tuple(per_speaker)})


def draw_speaker_lists(pool: UtterancePool, n_spk: int, per_speaker: int,
                       rng: np.random.Generator) -> dict[str, list[UtteranceRecord]]:
    """Pick ``n_spk`` speakers and ``per_speaker`` distinct utterances of each."""
    speakers = pool.speakers
    if len(speakers) < n_spk:
        raise ValueError(f"pool has {len(speakers)} speakers, need {n_spk}")
    out = {}
    for i in rng.choice(len(speakers), size=n_spk, replace=False):
        spk = speakers[i]
        recs = pool[spk]
        if len(recs) < per_speaker:
            raise PoolExhaustedError(spk)
        out[spk] = [recs[j] for j in rng.choice(len(recs), size=per_speaker, replace=False)]
    return out


def transition_histogram(plan: MixturePlan) -> dict[str, int]:
    counts = Counter(p.transition.name for p in plan.placements if p.transition is not None)
    return {t.name: counts.get(t.name, 0) for t in TransitionType}


