"""Pure numpy version of the instantaneous-correlation kernel.

``out`` is an ``N x N`` array; row ``n`` holds, for every half-sample lag
``m`` in ``(-N/2, N/2)``, the product ``xu1[2n+m] * conj(xu2[2n-m])`` stored
at column ``m mod N``. Lags ``+N/2`` and ``-N/2`` alias to the same column
and are stored as their average. ``xu1``/``xu2`` are the 2x band-limited
interpolants (length ``2N``). Out-of-range indices contribute zero unless
``circular`` is set, in which case they wrap modulo ``2N``.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=16)
def _index_plan(n_time: int, circular: bool):
    size = 2 * n_time
    half = n_time // 2
    n = np.arange(n_time)[:, None]
    lags = np.arange(-half, half + 1)[None, :]
    p = 2 * n + lags
    q = 2 * n - lags
    if circular:
        valid = np.ones(p.shape, dtype=bool)
        p, q = p % size, q % size
    else:
        valid = (p >= 0) & (q >= 0) & (p < size) & (q < size)
        p, q = np.where(valid, p, 0), np.where(valid, q, 0)
    weight = np.where(valid, 1.0, 0.0)
    weight[:, 0] *= 0.5
    weight[:, -1] *= 0.5
    cols = np.mod(lags[0], n_time)
    for a in (p, q, weight):
        a.setflags(write=False)
    return p, q, weight, cols


def accumulate_lag_products(xu1, xu2, out, circular=False, weight=1.0):
    n_time, n_lag = out.shape
    if xu1.shape[0] != 2 * n_time or xu2.shape[0] != 2 * n_time or n_lag != n_time:
        raise ValueError("upsampled inputs must have length 2*N and out must be N x N")
    p, q, w, cols = _index_plan(n_time, bool(circular))
    r = (weight * w) * xu1[p] * np.conj(xu2[q])
    half = n_time // 2
    out[:, cols[1:-1]] += r[:, 1:-1]
    out[:, half] += r[:, 0] + r[:, -1]
