"""Seeded sampling primitives.

Random streams are numpy ``Generator`` objects over PCG64. A stream is keyed
by ``SeedSequence([seed, *keys])``, so ``make_rng(base, i)`` gives mixture
``i`` its own substream regardless of how mixtures are scheduled. Every
continuous draw goes through an explicit inverse CDF applied to
``rng.random()``, which makes the draws testable from fixed uniforms.
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .timeline import SimParams, TransitionType, TYPE_ORDER

RNG_ALGORITHM = "PCG64/SeedSequence v1"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def derive_seed(base_seed: int, index: int) -> int:
    """64-bit seed for substream ``index`` of ``base_seed``."""
    lo, hi = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(2, np.uint32)
    return int(hi) << 32 | int(lo)


# -- inverse CDFs -----------------------------------------------------------

def exponential_icdf(u, beta: float):
    """Inverse CDF of the exponential distribution with mean ``beta``."""
    return -beta * np.log1p(-np.asarray(u, dtype=np.float64))


def truncexp_icdf(u, beta: float, lo: float, hi: float):
    """Inverse CDF of Exp(mean=beta) restricted to [lo, hi].

    Written as lo + (truncated exponential on [0, hi-lo]) with expm1/log1p so
    it stays accurate both for tiny beta and for beta -> infinity.
    """
    u = np.asarray(u, dtype=np.float64)
    mass = -math.expm1(-(hi - lo) / beta)  # P(X <= hi - lo)
    x = lo - beta * np.log1p(-u * mass)
    return np.clip(x, lo, hi)


def truncexp_mean(beta: float, lo: float, hi: float) -> float:
    """Closed-form mean of Exp(mean=beta) restricted to [lo, hi]."""
    w = hi - lo
    r = w / beta
    if r < 1e-8:
        return lo + w / 2
    # mean of exponential truncated to [0, w]: beta - w / (e^{w/beta} - 1)
    # w / expm1(r) rewritten with e^{-r} so it cannot overflow for tiny beta
    return lo + beta - w * math.exp(-r) / -math.expm1(-r)


def categorical_icdf(u: float, probs) -> int:
    """Smallest index whose cumulative probability exceeds ``u``.

    Never returns an index past the last positive entry, so rounding in the
    cumulative sum cannot select a zero-probability tail. Plain Python: the
    vectors are tiny and this sits on the per-step path.
    """
    cdf = 0.0
    k = last = -1
    for i, p in enumerate(probs):
        p = float(p)
        if p > 0:
            last = i
        cdf += p
        if k < 0 and cdf > u:
            k = i
    if k < 0:
        k = last
    return min(k, last)


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"invalid probability vector {probs!r}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum():g}, expected 1")
    return p


# -- draws ------------------------------------------------------------------

def sample_exponential(beta: float, rng: np.random.Generator, size=None):
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    out = exponential_icdf(rng.random(size), beta)
    return float(out) if size is None else out


def sample_truncated_exponential(beta: float, epsilon: float, rng: np.random.Generator, size=None):
    """Overlap ratio on [epsilon, 1 - epsilon] with density proportional to exp(-rho/beta)."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    out = truncexp_icdf(rng.random(size), beta, epsilon, 1.0 - epsilon)
    return float(out) if size is None else out


def sample_categorical(probs, rng: np.random.Generator) -> int:
    return categorical_icdf(rng.random(), _check_probs(probs))


def next_transition(mode: str, prev: TransitionType | None, params: SimParams,
                    rng: np.random.Generator, single_speaker: bool = False) -> TransitionType:
    """Draw the next transition type.

    Markov mode conditions on ``prev`` (column of ``p_markov``); the first
    transition of a mixture (``prev=None``) is drawn from ``p_ind``. With a
    single speaker only TH is possible.
    """
    u = rng.random()
    if single_speaker:
        return TransitionType.TH
    if mode == "markov" and prev is not None:
        col = [row[int(prev)] for row in params.p_markov]
        return TYPE_ORDER[categorical_icdf(u, col)]
    if mode not in ("random", "markov"):
        raise ValueError(f"unknown selection mode {mode!r}")
    return TYPE_ORDER[categorical_icdf(u, params.p_ind)]


def sample_transition_sequence(mode: str, n: int, params: SimParams,
                               rng: np.random.Generator) -> np.ndarray:
    """``n`` consecutive transition types as integer codes.

    Consumes one uniform per draw, like repeated ``next_transition`` calls
    starting from ``prev=None``, and gives the same result.
    """
    u = rng.random(n)
    return _kernels.transition_chain(u, params.p_ind_array, params.p_markov_array,
                                     mode == "markov")
