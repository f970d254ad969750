"""Numeric inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``CONVMIX_DISABLE_NUMBA`` is
unset (or "0"). Both paths are always importable so tests and the benchmark
can compare them directly::

    from convmix import _kernels
    _kernels.numba_impl.emd_sorted(u, v)
    _kernels.numpy_impl.emd_sorted(u, v)
"""
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("CONVMIX_DISABLE_NUMBA", "0") in ("", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy
# ---------------------------------------------------------------------------

def _sweep_numpy(starts, ends, spk, n_spk, extent):
    """Maximal constant-count intervals over [0, extent].

    Returns (lo, hi, count) arrays. A speaker with several overlapping
    segments counts once.
    """
    n = starts.shape[0]
    if n == 0:
        if extent > 0:
            return np.array([0.0]), np.array([extent]), np.array([0], dtype=np.int64)
        return np.empty(0), np.empty(0), np.empty(0, dtype=np.int64)
    times, inv = np.unique(np.concatenate((starts, ends, [0.0, extent])), return_inverse=True)
    delta = np.zeros((times.shape[0], n_spk), dtype=np.int64)
    np.add.at(delta, (inv[:n], spk), 1)
    np.add.at(delta, (inv[n:2 * n], spk), -1)
    active = (np.cumsum(delta, axis=0) > 0).sum(axis=1)
    # the last entry is the state at/after `extent`
    counts = active[:-1]
    lo = times[:-1]
    hi = times[1:]
    keep = np.ones(counts.shape[0], dtype=bool)
    keep[1:] = counts[1:] != counts[:-1]
    idx = np.flatnonzero(keep)
    out_hi = np.append(lo[idx[1:]], hi[-1])
    return lo[idx], out_hi, counts[idx].astype(np.int64)


def _emd_sorted_numpy(u, v):
    """Area between the empirical CDFs of two sorted samples."""
    allv = np.concatenate((u, v))
    allv.sort(kind="mergesort")
    deltas = np.diff(allv)
    cu = np.searchsorted(u, allv[:-1], side="right") / u.shape[0]
    cv = np.searchsorted(v, allv[:-1], side="right") / v.shape[0]
    return float(np.sum(np.abs(cu - cv) * deltas))


def _transition_chain_numpy(uniforms, p_ind, p_markov, markov, first):
    cdf_ind = np.cumsum(p_ind)
    n = uniforms.shape[0]
    if not markov:
        out = np.searchsorted(cdf_ind, uniforms, side="right")
        return np.minimum(out, _last_positive(p_ind)).astype(np.int64)
    cdf_cols = np.cumsum(p_markov, axis=0).T.copy()
    last = [_last_positive(p_markov[:, j]) for j in range(p_markov.shape[1])]
    out = np.empty(n, dtype=np.int64)
    prev = first
    for i in range(n):
        if prev < 0:
            k = min(int(np.searchsorted(cdf_ind, uniforms[i], side="right")), _last_positive(p_ind))
        else:
            k = min(int(np.searchsorted(cdf_cols[prev], uniforms[i], side="right")), last[prev])
        out[i] = k
        prev = k
    return out


def _last_positive(p):
    nz = np.flatnonzero(np.asarray(p) > 0)
    return int(nz[-1]) if nz.size else len(p) - 1


numpy_impl = SimpleNamespace(
    sweep=_sweep_numpy,
    emd_sorted=_emd_sorted_numpy,
    transition_chain=_transition_chain_numpy,
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

def _sweep_loop(starts, ends, spk, n_spk, extent):
    n = starts.shape[0]
    times = np.empty(2 * n)
    deltas = np.empty(2 * n, dtype=np.int64)
    who = np.empty(2 * n, dtype=np.int64)
    for i in range(n):
        times[i] = starts[i]
        deltas[i] = 1
        who[i] = spk[i]
        times[n + i] = ends[i]
        deltas[n + i] = -1
        who[n + i] = spk[i]
    order = np.argsort(times, kind="mergesort")

    lo = np.empty(2 * n + 2)
    hi = np.empty(2 * n + 2)
    cnt = np.empty(2 * n + 2, dtype=np.int64)
    m = 0
    active = np.zeros(n_spk, dtype=np.int64)
    distinct = 0
    cur_t = 0.0
    cur_c = 0
    i = 0
    while i < 2 * n:
        t = times[order[i]]
        while i < 2 * n and times[order[i]] == t:
            e = order[i]
            s = who[e]
            before = active[s]
            active[s] += deltas[e]
            if before == 0 and active[s] > 0:
                distinct += 1
            elif before > 0 and active[s] == 0:
                distinct -= 1
            i += 1
        if t > cur_t:
            if distinct != cur_c:
                lo[m] = cur_t
                hi[m] = t
                cnt[m] = cur_c
                m += 1
                cur_t = t
                cur_c = distinct
        else:
            cur_c = distinct
    if extent > cur_t:
        lo[m] = cur_t
        hi[m] = extent
        cnt[m] = cur_c
        m += 1
    return lo[:m], hi[:m], cnt[:m]


def _emd_sorted_loop(u, v):
    m = u.shape[0]
    n = v.shape[0]
    i = 0
    j = 0
    total = 0.0
    if u[0] < v[0]:
        x = u[0]
    else:
        x = v[0]
    while i < m or j < n:
        if j >= n or (i < m and u[i] <= v[j]):
            nxt = u[i]
        else:
            nxt = v[j]
        total += abs(i / m - j / n) * (nxt - x)
        x = nxt
        while i < m and u[i] == x:
            i += 1
        while j < n and v[j] == x:
            j += 1
    return total


def _pick(cdf, u, last):
    k = 0
    while k < cdf.shape[0] - 1 and cdf[k] <= u:
        k += 1
    if cdf[k] <= u or k > last:
        k = last
    return k


def _transition_chain_loop(uniforms, p_ind, p_markov, markov, first):
    n = uniforms.shape[0]
    k4 = p_ind.shape[0]
    cdf_ind = np.cumsum(p_ind)
    last_ind = k4 - 1
    while last_ind > 0 and p_ind[last_ind] <= 0:
        last_ind -= 1
    cdf_cols = np.empty((k4, k4))
    last_col = np.empty(k4, dtype=np.int64)
    for j in range(k4):
        acc = 0.0
        lj = 0
        for r in range(k4):
            acc += p_markov[r, j]
            cdf_cols[j, r] = acc
            if p_markov[r, j] > 0:
                lj = r
        last_col[j] = lj
    out = np.empty(n, dtype=np.int64)
    prev = first
    for i in range(n):
        if not markov or prev < 0:
            k = _pick(cdf_ind, uniforms[i], last_ind)
        else:
            k = _pick(cdf_cols[prev], uniforms[i], last_col[prev])
        out[i] = k
        prev = k
    return out


if HAS_NUMBA:
    _pick = numba.njit(cache=True)(_pick)
    numba_impl = SimpleNamespace(
        sweep=numba.njit(cache=True)(_sweep_loop),
        emd_sorted=numba.njit(cache=True)(_emd_sorted_loop),
        transition_chain=numba.njit(cache=True)(_transition_chain_loop),
    )
else:  # pragma: no cover
    numba_impl = SimpleNamespace(
        sweep=_sweep_loop,
        emd_sorted=_emd_sorted_loop,
        transition_chain=_transition_chain_loop,
    )

_active = numba_impl if USE_NUMBA else numpy_impl


def sweep(starts, ends, spk, n_spk, extent):
    return _active.sweep(
        np.ascontiguousarray(starts, dtype=np.float64),
        np.ascontiguousarray(ends, dtype=np.float64),
        np.ascontiguousarray(spk, dtype=np.int64),
        int(n_spk),
        float(extent),
    )


def emd_sorted(u, v):
    return float(_active.emd_sorted(
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
    ))


def transition_chain(uniforms, p_ind, p_markov, markov, first=-1):
    """Categorical draws by inverse CDF; ``first`` is the state before draw 0 (-1: none)."""
    if p_markov is None:
        p_markov = np.zeros((len(p_ind), len(p_ind)))
    return _active.transition_chain(
        np.ascontiguousarray(uniforms, dtype=np.float64),
        np.ascontiguousarray(p_ind, dtype=np.float64),
        np.ascontiguousarray(p_markov, dtype=np.float64),
        bool(markov),
        int(first),
    )
