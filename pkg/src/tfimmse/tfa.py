"""Quadratic time-frequency analysis.

Discretization
--------------
The Wigner distribution is evaluated on the half-sample lag grid: the input
is first interpolated by 2 (band-limited, periodic), so the continuous
lag product ``x(t + tau/2) x*(t - tau/2)`` is available at every integer
``tau`` in samples. With lag step ``dt`` the kernel ``exp(-j 2 pi f tau)`` has
period ``fs`` in frequency, so the ``N`` bins of ``[-fs/2, fs/2)`` hold one
alias-free period. Lags are kept in ``|tau| <= N/2`` (the lags an ``N``-point
grid can resolve), the two end lags sharing one column at half weight. With
the ``dt`` prefactor this gives, for every time slice,

    sum_f W(n, f) * df == |x[n]|**2

exactly, and hence ``sum W dt df == ||x||**2 dt``. Near the ends the lag
window shrinks (zero padding) unless ``circular=True``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError, UsageError
from .signals import (Signal, SourceModel, SpectralDensity, _check_compatible, derive_seed,
                      dft_freqs, realize, analytic_signal)

KINDS = ("auto", "cross", "conditional")


def _check_axis(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size >= 2:
        d = np.diff(a)
        if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ShapeError(f"{name} must be strictly increasing and uniformly spaced")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TFDist:
    """Time x frequency grid of (cross/conditional) Wigner values.

    ``values[i, k]`` belongs to ``time_axis[i]`` and ``freq_axis[k]``.
    """

    values: np.ndarray
    time_axis: np.ndarray
    freq_axis: np.ndarray
    kind: str = "auto"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        t = _check_axis(self.time_axis, "time_axis")
        f = _check_axis(self.freq_axis, "freq_axis")
        if v.shape != (t.size, f.size):
            raise ShapeError(f"values shape {v.shape} does not match axes ({t.size}, {f.size})")
        if self.kind not in KINDS:
            raise UsageError(f"kind must be one of {KINDS}")
        if self.kind == "auto" and v.size:
            scale = np.max(np.abs(v))
            if np.max(np.abs(v.imag)) > 1e-9 * scale:
                raise ShapeError("auto distribution has a non-negligible imaginary part")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time_axis", t)
        object.__setattr__(self, "freq_axis", f)

    @property
    def shape(self):
        return self.values.shape

    @property
    def dt(self) -> float:
        return float(self.time_axis[1] - self.time_axis[0]) if self.time_axis.size > 1 else 1.0

    @property
    def df(self) -> float:
        return float(self.freq_axis[1] - self.freq_axis[0]) if self.freq_axis.size > 1 else 1.0

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def same_grid(self, other: "TFDist") -> bool:
        return (self.shape == other.shape and np.array_equal(self.time_axis, other.time_axis)
                and np.array_equal(self.freq_axis, other.freq_axis))

    def frequency_marginal(self) -> np.ndarray:
        return np.sum(self.values, axis=1) * self.df

    def energy(self) -> complex:
        return complex(np.sum(self.values) * self.dt * self.df)

    def conj(self) -> "TFDist":
        return TFDist(np.conj(self.values), self.time_axis, self.freq_axis, self.kind)

    def mirrored(self) -> "TFDist":
        """Values at ``-f`` on the same grid (the ``-fs/2`` bin maps to itself)."""
        n = self.freq_axis.size
        return TFDist(self.values[:, (-np.arange(n)) % n], self.time_axis, self.freq_axis, self.kind)


def upsample2(x: np.ndarray) -> np.ndarray:
    """Periodic band-limited interpolation by 2; even outputs equal the input."""
    n = x.size
    X = np.fft.fft(x)
    Xu = np.zeros(2 * n, dtype=np.complex128)
    h = n // 2
    Xu[:h] = 2 * X[:h]
    Xu[2 * n - h + 1:] = 2 * X[h + 1:]
    Xu[h] = X[h]
    Xu[2 * n - h] = X[h]
    return np.fft.ifft(Xu)


def lag_matrix(x1: Signal, x2: Signal, circular: bool = False) -> np.ndarray:
    """Instantaneous correlation matrix feeding :func:`lag_to_tf`."""
    out = np.zeros((len(x1), len(x1)), dtype=np.complex128)
    kernels.accumulate_lag_products(upsample2(x1.samples), upsample2(x2.samples), out, circular, 1.0)
    return out


def lag_to_tf(c: np.ndarray, dt: float) -> np.ndarray:
    """Lag-domain rows to Wigner values on the ``[-fs/2, fs/2)`` grid."""
    return dt * np.fft.fftshift(np.fft.fft(c, axis=1), axes=1)


def _axes(x: Signal):
    return x.times, dft_freqs(len(x), x.sample_rate)


def wigner(x: Signal, circular: bool = False) -> TFDist:
    """Discrete Wigner-Ville distribution of ``x`` (real-valued, kind='auto')."""
    if len(x) % 2:
        raise ShapeError("wigner needs an even-length signal")
    w = lag_to_tf(lag_matrix(x, x, circular), x.dt)
    t, f = _axes(x)
    return TFDist(w, t, f, "auto")


def cross_wigner(x1: Signal, x2: Signal, circular: bool = False) -> TFDist:
    """Cross-Wigner distribution ``W_{x1,x2}`` (complex in general)."""
    _check_compatible(x1, x2)
    w = lag_to_tf(lag_matrix(x1, x2, circular), x1.dt)
    t, f = _axes(x1)
    return TFDist(w, t, f, "cross")


def mixture_wd_residuals(x1: Signal, x2: Signal) -> dict:
    """Residuals of the mixture expansion of ``W_{x1+x2}``.

    ``plus`` checks ``W1 + W2 + 2 Re W12`` (the quadratic expansion);
    ``minus`` checks ``W1 + W2 - 2 Re W12``. Both are max-abs over the grid;
    ``scale`` is ``max |W_{x1+x2}|``.
    """
    _check_compatible(x1, x2)
    wy = wigner(x1 + x2).real
    w1, w2 = wigner(x1).real, wigner(x2).real
    w12 = cross_wigner(x1, x2).values.real
    return {
        "plus": float(np.max(np.abs(wy - w1 - w2 - 2 * w12))),
        "minus": float(np.max(np.abs(wy - w1 - w2 + 2 * w12))),
        "scale": float(np.max(np.abs(wy))),
    }


def mixture_wd_check(x1: Signal, x2: Signal) -> float:
    """Max ``|W_{x1+x2} - W_{x1} - W_{x2} - 2 Re W_{x1,x2}|`` over the grid."""
    return mixture_wd_residuals(x1, x2)["plus"]


def wd_property_residuals(x: Signal, tf: TFDist | None = None) -> dict:
    """Marginal, energy and realness residuals of ``wigner(x)``.

    ``marginal`` is the largest per-slice relative error of
    ``sum_f W df`` against ``|x[n]|^2``; ``energy`` is the relative error of
    ``sum W dt df`` against ``||x||^2 dt``; ``realness`` is
    ``max|Im W| / max|W|``. All are zero for the zero signal.
    """
    if tf is None:
        w = lag_to_tf(lag_matrix(x, x), x.dt)
    else:
        w = tf.values
    inst = np.abs(x.samples) ** 2
    marg = np.sum(w.real, axis=1) * (x.sample_rate / len(x))
    nz = inst > 0
    marginal = float(np.max(np.abs(marg[nz] - inst[nz]) / inst[nz])) if nz.any() else float(np.max(np.abs(marg)))
    e_ref = x.energy() * x.dt
    e = float(np.sum(w.real)) * x.dt * (x.sample_rate / len(x))
    energy = abs(e - e_ref) / e_ref if e_ref > 0 else abs(e)
    scale = np.max(np.abs(w))
    realness = float(np.max(np.abs(w.imag)) / scale) if scale > 0 else 0.0
    return {"marginal": marginal, "energy": float(energy), "realness": realness}


def wv_spectrum(model: SourceModel, n: int, n_realizations: int, seed: int,
                sample_rate: float = 1.0, analytic: bool = False) -> TFDist:
    """Ensemble-averaged Wigner distribution (Wigner-Ville spectrum estimate).

    Realization ``r`` is drawn with ``derive_seed(seed, r)``. Averaging is done
    on the lag products, which is exact because the transform is linear.
    """
    if n_realizations < 1:
        raise UsageError("n_realizations must be >= 1")
    deterministic = model.kind == "chirp"
    count = 1 if deterministic else n_realizations
    acc = np.zeros((n, n), dtype=np.complex128)
    for r in range(count):
        x = realize(model, n, sample_rate, derive_seed(seed, r))
        if analytic:
            x = analytic_signal(x)
        xu = upsample2(x.samples)
        kernels.accumulate_lag_products(xu, xu, acc, False, 1.0)
    if count > 1:
        acc /= count
    w = lag_to_tf(acc, 1.0 / sample_rate)
    t = np.arange(n) / sample_rate
    return TFDist(w, t, dft_freqs(n, sample_rate), "auto")


def psd(x: Signal) -> SpectralDensity:
    """Periodogram ``|X_k|^2 dt / N``; sums (times df) to the mean power."""
    X = np.fft.fftshift(np.fft.fft(x.samples))
    return SpectralDensity(dft_freqs(len(x), x.sample_rate), np.abs(X) ** 2 * x.dt / len(x))


def psd_welch(model: SourceModel, n: int, n_realizations: int, seed: int,
              sample_rate: float = 1.0) -> SpectralDensity:
    """Ensemble-averaged periodogram over independent realizations."""
    if n_realizations < 1:
        raise UsageError("n_realizations must be >= 1")
    acc = np.zeros(n)
    for r in range(n_realizations):
        acc += psd(realize(model, n, sample_rate, derive_seed(seed, r))).values
    return SpectralDensity(dft_freqs(n, sample_rate), acc / n_realizations)


def stft(x: Signal, window_len: int, hop: int) -> TFDist:
    """Hann-windowed spectrogram ``|STFT|^2 dt / sum(w^2)`` (diagnostic only)."""
    n = len(x)
    if window_len > n:
        raise ShapeError(f"window_len {window_len} exceeds signal length {n}")
    if window_len < 2 or window_len % 2:
        raise ShapeError("window_len must be even and >= 2")
    if hop < 1:
        raise UsageError("hop must be >= 1")
    w = np.hanning(window_len + 1)[:-1]
    starts = np.arange(0, n - window_len + 1, hop)
    frames = np.stack([x.samples[s:s + window_len] * w for s in starts])
    spec = np.abs(np.fft.fftshift(np.fft.fft(frames, axis=1), axes=1)) ** 2 * x.dt / np.sum(w * w)
    t = x.t0 + (starts + window_len / 2) * x.dt
    return TFDist(spec.astype(np.complex128), t, dft_freqs(window_len, x.sample_rate), "auto")
