# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled instantaneous-correlation kernel for the discrete Wigner distribution."""


def accumulate_lag_products(const double complex[::1] xu1, const double complex[::1] xu2,
                            double complex[:, ::1] out, bint circular=False, double weight=1.0):
    """Add ``weight * c[n, m]`` into ``out`` (see ``_lagprod_py`` for the layout)."""
    cdef Py_ssize_t n_time = out.shape[0]
    cdef Py_ssize_t n_lag = out.shape[1]
    cdef Py_ssize_t size = xu1.shape[0]
    cdef Py_ssize_t half = n_lag // 2
    cdef Py_ssize_t n, m, p, q, col
    cdef double complex acc
    if xu2.shape[0] != size or size != 2 * n_time or n_lag != n_time:
        raise ValueError("upsampled inputs must have length 2*N and out must be N x N")
    for n in range(n_time):
        for m in range(-half + 1, half):
            p = 2 * n + m
            q = 2 * n - m
            if circular:
                p = (p + size) % size
                q = (q + size) % size
            elif p < 0 or q < 0 or p >= size or q >= size:
                continue
            col = m if m >= 0 else m + n_lag
            out[n, col] = out[n, col] + weight * xu1[p] * xu2[q].conjugate()
        # lags +half and -half share one column; each carries half weight
        acc = 0
        for m in (half, -half):
            p = 2 * n + m
            q = 2 * n - m
            if circular:
                p = (p + size) % size
                q = (q + size) % size
            elif p < 0 or q < 0 or p >= size or q >= size:
                continue
            acc = acc + xu1[p] * xu2[q].conjugate()
        out[n, half] = out[n, half] + 0.5 * weight * acc
