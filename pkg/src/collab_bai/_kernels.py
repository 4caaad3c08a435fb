"""Hot loop of successive elimination, with a numba path and a numpy path.

Set ``BANDIT_COLLAB_JIT=0`` to force the numpy path (also used automatically
when numba is missing). Both paths consume the same pre-drawn reward block and
compare integer reward sums against a pre-computed threshold array, so they make
bit-identical decisions.

Contract of ``se_scan(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead)``:

* ``rewards[k, i]`` is the reward of arm ``i`` in the k-th epoch of the block
  (only active columns are read);
* ``thr[k]`` is the elimination threshold on *sums* for that epoch, i.e. an arm
  is dropped when ``max_active_sum - sums[i] > thr[k]``;
* ``cap < 0`` means no pull budget.

``sums`` and ``active`` are updated in place; for every arm dropped at absolute
epoch ``t`` (``t0`` epochs precede the block) ``elim_t[i] = t`` and ``elim_lead[i]``
is the leader's sum at that moment. Returns ``(epochs, pulls, status)``
with status ``RUNNING`` (block used up), ``DONE`` (one arm left) or ``CAPPED``.
"""

from __future__ import annotations

import os

import numpy as np

RUNNING, DONE, CAPPED = 0, 1, 2

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_ENABLED = numba is not None and os.environ.get("BANDIT_COLLAB_JIT", "1") not in ("0", "false", "no")


def se_scan_numpy(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead):
    nblock = rewards.shape[0]
    k0 = 0
    while True:
        idx = np.flatnonzero(active)
        m = idx.size
        if m <= 1:
            return k0, pulls, DONE
        left = nblock - k0
        if left == 0:
            return k0, pulls, RUNNING
        cum = sums[idx] + np.cumsum(rewards[k0:, idx], axis=0, dtype=np.int64)
        lead = cum.max(axis=1)
        drop = (lead[:, None] - cum) > thr[k0:, None]
        hit = drop.any(axis=1)
        first = int(np.argmax(hit)) if hit.any() else left
        limit = first + 1 if first < left else left
        if cap >= 0:
            affordable = (cap - pulls) // m
            if affordable < limit:
                if affordable > 0:
                    sums[idx] = cum[affordable - 1]
                return k0 + affordable, pulls + affordable * m, CAPPED
        sums[idx] = cum[limit - 1]
        pulls += limit * m
        k0 += limit
        if first < left:
            gone = idx[drop[first]]
            active[gone] = False
            elim_t[gone] = t0 + k0
            elim_lead[gone] = lead[first]


def _se_scan_py(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead):
    nblock, n = rewards.shape
    m = 0
    for i in range(n):
        if active[i]:
            m += 1
    if m <= 1:
        return 0, pulls, DONE
    for k in range(nblock):
        if cap >= 0 and pulls + m > cap:
            return k, pulls, CAPPED
        lead = -1
        for i in range(n):
            if active[i]:
                sums[i] += rewards[k, i]
                if sums[i] > lead:
                    lead = sums[i]
        pulls += m
        for i in range(n):
            if active[i] and lead - sums[i] > thr[k]:
                active[i] = False
                elim_t[i] = t0 + k + 1
                elim_lead[i] = lead
                m -= 1
        if m <= 1:
            return k + 1, pulls, DONE
    return nblock, pulls, RUNNING


if numba is not None:
    se_scan_numba = numba.njit(cache=True, nogil=True)(_se_scan_py)
else:  # pragma: no cover
    se_scan_numba = None


def se_scan(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead):
    if JIT_ENABLED:
        k, p, s = se_scan_numba(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead)
        return int(k), int(p), int(s)
    return se_scan_numpy(sums, active, rewards, thr, t0, pulls, cap, elim_t, elim_lead)
