"""Hot numeric kernels: per-action payoff values and best-response gaps.

Everything here works on a flat layout so the same buffers feed both code
paths:

* ``payoffs``: float64 array of shape ``(n, A)`` where ``A = prod(counts)``
  and the joint-action index is C-order with player 0 slowest,
* ``counts`` / ``strides``: int64 per-player action counts and C-order
  strides (``strides[i] = prod(counts[i+1:])``),
* ``offsets``: int64 array of length ``n + 1`` delimiting each player's
  slice of a concatenated distribution vector,
* a profile is the float64 concatenation of the per-player distributions.

The numba path is selected at import time; set ``SATPATH_NO_NUMBA=1`` to
force the pure-numpy fallback (the benchmark in ``benchmarks/`` compares
both).  Results agree to floating-point rounding, not bit-for-bit, because
the two paths sum in different orders.
"""

from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("SATPATH_NO_NUMBA", "") == "1"

USING_NUMBA = False
if not _FORCE_NUMPY:
    try:
        # workqueue is always present and keeps the parallel loop deterministic
        os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
        import numba

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False


def _np_q_values(payoffs, counts, strides, offsets, flat):
    """Per-player, per-own-action expected payoffs, opponents fixed.

    Returns a flat vector sharing ``offsets`` with the input profile:
    slice ``i`` holds player ``i``'s value for each of its pure actions
    against the opponents' mixtures in ``flat``.
    """
    n = len(counts)
    full = payoffs.reshape((n,) + tuple(int(c) for c in counts))
    dists = [flat[offsets[j]:offsets[j + 1]] for j in range(n)]
    out = np.empty(int(offsets[n]))
    letters = [chr(ord("a") + j) for j in range(n)]
    for i in range(n):
        subs = ["".join(letters)]
        operands = [full[i]]
        for j in range(n):
            if j != i:
                subs.append(letters[j])
                operands.append(dists[j])
        out[offsets[i]:offsets[i + 1]] = np.einsum(
            ",".join(subs) + "->" + letters[i], *operands, optimize=True
        )
    return out


def _np_batch_gaps(payoffs, counts, strides, offsets, batch):
    """Best-response gap per (profile, player) for a batch of profiles.

    ``batch`` has shape ``(B, D)`` with one concatenated profile per row;
    the result has shape ``(B, n)`` holding ``max_a q_i(a) - E_i`` which is
    nonnegative up to rounding.
    """
    n = len(counts)
    B = batch.shape[0]
    full = payoffs.reshape((n,) + tuple(int(c) for c in counts))
    letters = [chr(ord("a") + j) for j in range(n)]
    gaps = np.empty((B, n))
    for i in range(n):
        subs = ["".join(letters)]
        operands = [full[i]]
        for j in range(n):
            if j != i:
                subs.append("z" + letters[j])
                operands.append(batch[:, offsets[j]:offsets[j + 1]])
        q = np.einsum(",".join(subs) + "->z" + letters[i], *operands, optimize=True)
        own = batch[:, offsets[i]:offsets[i + 1]]
        gaps[:, i] = q.max(axis=1) - np.einsum("za,za->z", q, own)
    return gaps


if USING_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _nb_index_table(counts, strides, offsets, A):
        # table[t, j] = flat-profile index of player j's action in joint t
        n = counts.shape[0]
        table = np.empty((A, n), dtype=np.int64)
        for t in range(A):
            for j in range(n):
                table[t, j] = offsets[j] + (t // strides[j]) % counts[j]
        return table

    @njit(cache=True)
    def _nb_q_accumulate(payoffs, table, n, flat, out):
        A = payoffs.shape[1]
        pref = np.empty(n + 1)
        suf = np.empty(n + 1)
        for t in range(A):
            pref[0] = 1.0
            for j in range(n):
                pref[j + 1] = pref[j] * flat[table[t, j]]
            suf[n] = 1.0
            for j in range(n - 1, -1, -1):
                suf[j] = suf[j + 1] * flat[table[t, j]]
            for i in range(n):
                out[table[t, i]] += payoffs[i, t] * pref[i] * suf[i + 1]

    @njit(cache=True)
    def _nb_q_values(payoffs, counts, strides, offsets, flat):
        n = counts.shape[0]
        table = _nb_index_table(counts, strides, offsets, payoffs.shape[1])
        out = np.zeros(offsets[n])
        _nb_q_accumulate(payoffs, table, n, flat, out)
        return out

    @njit(cache=True, parallel=True)
    def _nb_batch_gaps(payoffs, counts, strides, offsets, batch):
        B = batch.shape[0]
        n = counts.shape[0]
        table = _nb_index_table(counts, strides, offsets, payoffs.shape[1])
        gaps = np.empty((B, n))
        for b in prange(B):
            q = np.zeros(offsets[n])
            _nb_q_accumulate(payoffs, table, n, batch[b], q)
            for i in range(n):
                best = -np.inf
                expect = 0.0
                for a in range(counts[i]):
                    v = q[offsets[i] + a]
                    if v > best:
                        best = v
                    expect += v * batch[b, offsets[i] + a]
                gaps[b, i] = best - expect
        return gaps

    q_values_flat = _nb_q_values
    batch_gaps = _nb_batch_gaps
else:
    q_values_flat = _np_q_values
    batch_gaps = _np_batch_gaps
