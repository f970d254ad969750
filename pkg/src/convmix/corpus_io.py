"""Reading and writing annotations, manifests, parameters, plans and audio.

Formats:

* RTTM ``SPEAKER <file> <chan> <tbeg> <tdur> <NA> <NA> <speaker> <NA> <NA>``
* manifest: JSON lines ``{"id", "speaker", "duration", "path"}``
* params: JSON with ``beta``, ``epsilon``, ``mode``, ``p_ind``, ``p_markov``
  (rows = next type, in ``type_order``), ``n_spk``, ``n_utt``, ``snr_choices``
* plan sidecar: JSON ``{"mixture_id", "seed", "placements": [...]}``
* audio: RIFF/WAVE, PCM 16-bit, mono
"""
from __future__ import annotations

import json
import logging
import math
import os
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .timeline import (
    Annotation,
    MixturePlan,
    PlacedUtterance,
    SimParams,
    TimedSegment,
    TransitionType,
    TYPE_ORDER,
    UtterancePool,
    UtteranceRecord,
    validate_params,
)

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 8000
DEFAULT_EPSILON = 0.03


class FormatError(ValueError):
    pass


# -- RTTM -------------------------------------------------------------------

def parse_rttm(text: str, extents: dict[str, float] | None = None) -> list[Annotation]:
    """Parse RTTM text into one Annotation per file id (in order of first appearance)."""
    segs: dict[str, list[TimedSegment]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "SPEAKER":
            continue
        if len(parts) < 8:
            raise FormatError(f"malformed RTTM line {lineno}: expected 10 fields, got {len(parts)}")
        try:
            tbeg = float(parts[3])
            tdur = float(parts[4])
        except ValueError:
            raise FormatError(f"malformed RTTM line {lineno}: bad time field") from None
        if not (math.isfinite(tbeg) and math.isfinite(tdur)):
            raise FormatError(f"malformed RTTM line {lineno}: non-finite time")
        if tdur < 0:
            raise FormatError(f"negative duration at line {lineno}")
        if tbeg < 0:
            raise FormatError(f"negative onset at line {lineno}")
        segs.setdefault(parts[1], [])
        if tdur == 0:
            log.warning("skipping zero-length segment at RTTM line %d", lineno)
            continue
        segs[parts[1]].append(TimedSegment(tbeg, tdur, parts[7]))
    extents = extents or {}
    return [Annotation.from_segments(rec, s, extents.get(rec)) for rec, s in segs.items()]


def write_rttm(annotations: Iterable[Annotation]) -> str:
    lines = []
    for a in annotations:
        for s in a.segments:
            beg = round(s.onset, 3)
            dur = round(s.end, 3) - beg
            lines.append(
                f"SPEAKER {a.recording_id} 1 {beg:.3f} {dur:.3f} <NA> <NA> {s.speaker} <NA> <NA>")
    return "".join(line + "\n" for line in lines)


def read_rttm(path) -> list[Annotation]:
    return parse_rttm(Path(path).read_text())


def read_rttm_inputs(paths: Iterable) -> list[Annotation]:
    """Annotations from RTTM files and/or directories of ``*.rttm`` files."""
    out = []
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.rttm")) if p.is_dir() else [p]
        for f in files:
            out.extend(read_rttm(f))
    return out


# -- WAV --------------------------------------------------------------------

@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be > 0")
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("waveform must be mono (1-D)")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def read_wav(path) -> Waveform:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate, nframes = (w.getnchannels(), w.getsampwidth(),
                                              w.getframerate(), w.getnframes())
            raw = w.readframes(nframes)
    except (wave.Error, EOFError) as e:
        raise FormatError(f"{path}: not a PCM WAV file ({e})") from None
    if channels != 1:
        raise FormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise FormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(data, rate)


def write_wav(path, w: Waveform) -> int:
    """Write PCM16 mono; returns the number of samples clipped to full scale."""
    x = np.asarray(w.samples, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("waveform contains non-finite samples")
    clipped = int(np.count_nonzero(np.abs(x) > 1.0))
    if clipped:
        log.warning("%s: %d samples clipped", path, clipped)
    q = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(w.sample_rate))
        f.writeframes(q.tobytes())
    return clipped


# -- manifest ---------------------------------------------------------------

def read_manifest(path) -> list[UtteranceRecord]:
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = UtteranceRecord(str(d["id"]), str(d["speaker"]), float(d["duration"]),
                                      str(d.get("path", "")))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
                raise FormatError(f"{path}: bad manifest row {lineno}: {e}") from None
            rows.append(rec)
    return rows


def write_manifest(path, records: Iterable[UtteranceRecord]) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps({"id": r.utterance_id, "speaker": r.speaker,
                                "duration": r.duration, "path": r.path}) + "\n")


def load_pool(path, min_duration: float = 0.0) -> UtterancePool:
    """Group manifest rows by speaker, keeping utterances of at least ``min_duration`` s.

    Relative audio paths are resolved against the manifest's directory.
    """
    base = Path(path).parent
    groups: dict[str, list[UtteranceRecord]] = {}
    for r in read_manifest(path):
        groups.setdefault(r.speaker, [])
        if r.duration < min_duration:
            continue
        if r.path and not os.path.isabs(r.path):
            r = UtteranceRecord(r.utterance_id, r.speaker, r.duration, str(base / r.path))
        groups[r.speaker].append(r)
    for spk in [s for s, recs in groups.items() if not recs]:
        log.warning("speaker %s has no utterances >= %.2f s; dropped", spk, min_duration)
        del groups[spk]
    if not groups:
        raise ValueError("empty pool")
    return UtterancePool(groups)


# -- params -----------------------------------------------------------------

def params_to_dict(p: SimParams) -> dict:
    d = {
        "type_order": [t.name for t in TYPE_ORDER],
        "beta": {t.name.lower(): p.beta[t] for t in TYPE_ORDER},
        "epsilon": p.epsilon,
        "mode": p.mode,
        "p_ind": list(p.p_ind),
        "n_spk": p.n_spk,
        "n_utt": p.n_utt,
        "snr_choices": list(p.snr_choices),
    }
    if p.p_markov is not None:
        d["p_markov"] = [list(row) for row in p.p_markov]
    return d


def params_from_dict(d: dict) -> SimParams:
    def need(key):
        if key not in d:
            raise FormatError(f"params: missing field '{key}'")
        return d[key]

    order = d.get("type_order", [t.name for t in TYPE_ORDER])
    if [str(x).upper() for x in order] != [t.name for t in TYPE_ORDER]:
        raise FormatError(f"params: field 'type_order' must be TH, TS, IR, BC (got {order})")
    beta = need("beta")
    if not isinstance(beta, dict):
        raise FormatError("params: field 'beta' must be an object with th, ts, ir, bc")
    try:
        beta_t = tuple(beta.get(t.name.lower(), beta.get(t.name)) for t in TYPE_ORDER)
        if "epsilon" not in d:
            log.warning("params: 'epsilon' missing, using %.2f", DEFAULT_EPSILON)
        p = SimParams(
            beta=beta_t,
            p_ind=tuple(need("p_ind")),
            p_markov=None if d.get("p_markov") is None else tuple(map(tuple, d["p_markov"])),
            epsilon=float(d.get("epsilon", DEFAULT_EPSILON)),
            mode=str(d.get("mode", "random")),
            n_spk=int(d.get("n_spk", 2)),
            n_utt=int(d.get("n_utt", 30)),
            snr_choices=tuple(d.get("snr_choices", (5, 10, 15, 20))),
        )
    except (TypeError, ValueError) as e:
        raise FormatError(f"params: {e}") from None
    problems = validate_params(p)
    if problems:
        raise FormatError("params: " + "; ".join(problems))
    return p


def load_params(path) -> SimParams:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON ({e})") from None
    return params_from_dict(d)


def save_params(path, p: SimParams) -> None:
    with open(path, "w") as f:
        json.dump(params_to_dict(p), f, indent=2)
        f.write("\n")


# -- plan sidecar -----------------------------------------------------------

def plan_to_dict(plan: MixturePlan) -> dict:
    return {
        "mixture_id": plan.mixture_id,
        "seed": plan.seed,
        "method": plan.method,
        "placements": [
            {"id": p.utterance_id, "speaker": p.speaker, "onset": p.onset,
             "duration": p.duration,
             "transition": None if p.transition is None else p.transition.name}
            for p in plan.placements
        ],
    }


def plan_from_dict(d: dict, params: SimParams | None = None) -> MixturePlan:
    placements = tuple(
        PlacedUtterance(str(p["id"]), str(p["speaker"]), float(p["onset"]),
                        float(p["duration"]),
                        None if p.get("transition") is None else TransitionType.parse(p["transition"]))
        for p in d["placements"]
    )
    return MixturePlan(str(d["mixture_id"]), placements, params, int(d["seed"]),
                       str(d.get("method", "proposed")))


def write_plan(path, plan: MixturePlan) -> None:
    with open(path, "w") as f:
        json.dump(plan_to_dict(plan), f, indent=1)
        f.write("\n")


def read_plan(path, params: SimParams | None = None) -> MixturePlan:
    with open(path) as f:
        return plan_from_dict(json.load(f), params)
