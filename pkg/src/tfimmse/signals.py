"""Signals, spectral densities and synthetic sources.

Everything here is a pure function of its arguments and a seed. Random draws
go through :func:`numpy.random.default_rng` so that a ``(parameters, seed)``
pair always produces the same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConstructionError, ShapeError, UsageError

FIELDS = ("real", "complex_circular")


def derive_seed(seed: int, *path: int) -> int:
    """Child seed for position ``path`` under ``seed``.

    Used wherever work is split into independent units (realizations, sweep
    points, Monte Carlo batches) so serial and parallel runs agree.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, path)])
    return int(ss.generate_state(1, np.uint64)[0])


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Signal:
    """Uniformly sampled complex time series.

    Attributes
    ----------
    samples : ndarray of complex128
        Sample values. Length must be even and at least 2.
    sample_rate : float
        Samples per second.
    t0 : float
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    sample_rate: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.complex128).reshape(-1)
        if x.size < 2 or x.size % 2:
            raise ConstructionError(f"signal length must be even and >= 2, got {x.size}")
        fs = float(self.sample_rate)
        if not np.isfinite(fs) or fs <= 0:
            raise ConstructionError(f"sample_rate must be finite and > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", _readonly(x))
        object.__setattr__(self, "sample_rate", fs)
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    @property
    def is_real(self) -> bool:
        return not np.any(self.samples.imag)

    def energy(self) -> float:
        """Sum of squared magnitudes (no time step)."""
        return float(np.vdot(self.samples, self.samples).real)

    def mean_power(self) -> float:
        return self.energy() / len(self)

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate, self.t0)

    def shift(self, m: int) -> "Signal":
        """Circular shift by ``m`` samples (``x[n] -> x[n - m]``)."""
        return self.with_samples(np.roll(self.samples, m))

    def __add__(self, other: "Signal") -> "Signal":
        _check_compatible(self, other)
        return self.with_samples(self.samples + other.samples)

    def __mul__(self, c) -> "Signal":
        return self.with_samples(self.samples * c)

    __rmul__ = __mul__


def _check_compatible(a: Signal, b: Signal) -> None:
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ShapeError(f"sample_rate mismatch: {a.sample_rate} vs {b.sample_rate}")


def dft_freqs(n: int, sample_rate: float) -> np.ndarray:
    """The ``n`` bin centres of [-fs/2, fs/2), ascending."""
    return (np.arange(n) - n // 2) * (sample_rate / n)


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Nonnegative density sampled on a uniform frequency grid (power per Hz).

    The grid is either symmetric about zero or has the FFT layout
    ``[-fs/2, fs/2)`` with one unpaired bin at ``-fs/2``. Values are taken as
    zero outside the grid.
    """

    freqs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if f.size != v.size or f.size < 2:
            raise ConstructionError("freqs and values must have the same length >= 2")
        d = np.diff(f)
        if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ConstructionError("freqs must be strictly increasing and uniformly spaced")
        if not (np.isclose(f[0], -f[-1], atol=1e-9 * d[0]) or np.isclose(f[0], -f[-1] - d[0], atol=1e-9 * d[0])):
            raise ConstructionError("freqs must be symmetric about 0")
        if np.any(~np.isfinite(v)):
            raise ConstructionError("density values must be finite")
        if np.any(v < -1e-12):
            raise ConstructionError(f"negative density value {v.min():.3e}")
        v = np.where(v < 0, 0.0, v)
        object.__setattr__(self, "freqs", _readonly(f))
        object.__setattr__(self, "values", _readonly(v))

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def total_power(self) -> float:
        return float(np.sum(self.values) * self.df)

    def at(self, freqs) -> np.ndarray:
        """Linear interpolation onto ``freqs``; zero outside the grid."""
        return np.interp(np.asarray(freqs, dtype=float), self.freqs, self.values, left=0.0, right=0.0)

    def scaled(self, c: float) -> "SpectralDensity":
        return SpectralDensity(self.freqs, self.values * c)

    @classmethod
    def on_dft_grid(cls, n: int, sample_rate: float, values) -> "SpectralDensity":
        return cls(dft_freqs(n, sample_rate), np.broadcast_to(np.asarray(values, dtype=float), (n,)))

    @classmethod
    def lowpass(cls, n: int, sample_rate: float, band: float, level: float = 1.0) -> "SpectralDensity":
        """``level`` on ``|f| <= band``, zero elsewhere, on the n-point DFT grid."""
        f = dft_freqs(n, sample_rate)
        return cls(f, np.where(np.abs(f) <= band * (1 + 1e-12), level, 0.0))

    @classmethod
    def triangle(cls, n: int, sample_rate: float, band: float, peak: float = 1.0) -> "SpectralDensity":
        f = dft_freqs(n, sample_rate)
        return cls(f, peak * np.clip(1.0 - np.abs(f) / band, 0.0, None))


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Recipe for a synthetic input signal.

    Random models are normalised to unit mean power so that ``snr`` is the
    only power knob: Gaussian targets are rescaled to unit integral and
    alphabet atoms to unit second moment. A zero target is kept as-is (the
    silent source). Chirps keep their amplitude.
    """

    kind: str
    psd: Optional[SpectralDensity] = None
    chirp_params: Optional[tuple] = None
    atoms: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    seed: int = 0
    real: bool = False

    def __post_init__(self):
        if self.kind == "gaussian_psd":
            if self.psd is not None:
                p = self.psd.total_power()
                if p > 0 and abs(p - 1.0) > 1e-12:
                    object.__setattr__(self, "psd", self.psd.scaled(1.0 / p))
        elif self.kind == "chirp":
            if self.chirp_params is None or len(self.chirp_params) != 3:
                raise ConstructionError("chirp needs (f_start, f_end, amplitude)")
            object.__setattr__(self, "chirp_params", tuple(float(v) for v in self.chirp_params))
        elif self.kind == "discrete_alphabet":
            if self.atoms is None or len(self.atoms) == 0:
                raise ConstructionError("empty alphabet")
            a = np.asarray(self.atoms, dtype=np.complex128).reshape(-1)
            p = np.asarray(self.probs if self.probs is not None else np.full(a.size, 1.0 / a.size), dtype=float)
            if p.shape != a.shape:
                raise ConstructionError("atoms and probs must have equal length")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ConstructionError("alphabet probabilities must be >= 0 and sum to 1")
            m2 = float(np.sum(p * np.abs(a) ** 2))
            if m2 > 0:
                a = a / np.sqrt(m2)
            object.__setattr__(self, "atoms", _readonly(a))
            object.__setattr__(self, "probs", _readonly(p))
            object.__setattr__(self, "real", not np.any(a.imag))
        else:
            raise ConstructionError(f"unknown source kind {self.kind!r}")

    @classmethod
    def gaussian(cls, psd: Optional[SpectralDensity] = None, seed: int = 0, real: bool = False) -> "SourceModel":
        """Stationary Gaussian source; white when ``psd`` is None."""
        return cls("gaussian_psd", psd=psd, seed=seed, real=real)

    @classmethod
    def chirp(cls, f_start: float, f_end: float, amplitude: float = 1.0, real: bool = False) -> "SourceModel":
        return cls("chirp", chirp_params=(f_start, f_end, amplitude), real=real)

    @classmethod
    def discrete(cls, atoms: Sequence, probs: Optional[Sequence] = None, seed: int = 0) -> "SourceModel":
        return cls("discrete_alphabet", atoms=atoms, probs=probs, seed=seed)

    @classmethod
    def bpsk(cls, seed: int = 0) -> "SourceModel":
        return cls.discrete([1.0, -1.0], [0.5, 0.5], seed=seed)

    @classmethod
    def qpsk(cls, seed: int = 0) -> "SourceModel":
        return cls.discrete([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], [0.25] * 4, seed=seed)

    def with_seed(self, seed: int) -> "SourceModel":
        return replace(self, seed=seed)

    @property
    def is_silent(self) -> bool:
        if self.kind == "gaussian_psd":
            return self.psd is not None and self.psd.total_power() == 0
        if self.kind == "chirp":
            return self.chirp_params[2] == 0
        return False


@dataclass(frozen=True)
class MixtureChannel:
    """Two-input additive channel ``y = sqrt(snr) * (x1 + x2) + n``."""

    x1_model: SourceModel
    x2_model: SourceModel
    input_correlation: float = 0.0
    snr: float = 1.0
    field_convention: str = "real"

    def __post_init__(self):
        if not -1.0 <= self.input_correlation <= 1.0:
            raise ConstructionError("input_correlation must lie in [-1, 1]")
        if self.snr < 0:
            raise ConstructionError("snr must be >= 0")
        if self.field_convention not in FIELDS:
            raise ConstructionError(f"field_convention must be one of {FIELDS}")

    def realize(self, n: int, sample_rate: float, seed: int):
        """One draw of ``(x1, x2, y)``."""
        x1, x2 = draw_pair(self.x1_model, self.x2_model, self.input_correlation, n, sample_rate, seed)
        y = mix(x1, x2, self.snr, self.field_convention, derive_seed(seed, 2))
        return x1, x2, y


def _check_n(n: int) -> int:
    n = int(n)
    if n < 2 or n % 2:
        raise ConstructionError(f"n must be even and >= 2, got {n}")
    return n


def gen_gaussian_process(psd: SpectralDensity, n: int, sample_rate: float, seed: int, real: bool = False) -> Signal:
    """One realization of a zero-mean stationary Gaussian process with PSD ``psd``.

    White circular Gaussian DFT coefficients are scaled by ``sqrt(psd)`` on the
    n-point grid, so the mean power equals ``sum(psd) * fs / n``. With
    ``real=True`` the real part is kept and rescaled by ``sqrt(2)``, which
    realizes the symmetrized target ``(S(f) + S(-f)) / 2``.
    """
    n = _check_n(n)
    if np.any(np.asarray(psd.values) < 0):
        raise ConstructionError("psd must be nonnegative")
    s = psd.at(dft_freqs(n, sample_rate))
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    amp = np.sqrt(s * sample_rate * n)
    x = np.fft.ifft(np.fft.ifftshift(amp * z))
    if real:
        x = np.sqrt(2.0) * x.real
    return Signal(x, sample_rate)


def gen_chirp(f_start: float, f_end: float, n: int, sample_rate: float,
              amplitude: float = 1.0, real: bool = False) -> Signal:
    """Linear chirp whose instantaneous frequency at sample k is
    ``f_start + (f_end - f_start) * k / n``."""
    n = _check_n(n)
    nyq = sample_rate / 2
    if abs(f_start) >= nyq or abs(f_end) >= nyq:
        raise ConstructionError("chirp frequencies must be below Nyquist")
    t = np.arange(n) / sample_rate
    duration = n / sample_rate
    phase = 2 * np.pi * (f_start * t + 0.5 * (f_end - f_start) / duration * t * t)
    x = amplitude * (np.cos(phase) if real else np.exp(1j * phase))
    return Signal(x, sample_rate)


def gen_discrete(model: SourceModel, n: int, sample_rate: float) -> Signal:
    """i.i.d. draws from ``model``'s alphabet."""
    if model.kind != "discrete_alphabet":
        raise UsageError("gen_discrete needs a discrete_alphabet model")
    n = _check_n(n)
    rng = np.random.default_rng(model.seed)
    idx = rng.choice(model.atoms.size, size=n, p=model.probs)
    return Signal(model.atoms[idx], sample_rate)


def realize(model: SourceModel, n: int, sample_rate: float, seed: Optional[int] = None) -> Signal:
    """Draw one signal from any model; ``seed`` overrides ``model.seed``."""
    seed = model.seed if seed is None else seed
    if model.kind == "gaussian_psd":
        psd = model.psd if model.psd is not None else SpectralDensity.on_dft_grid(n, sample_rate, 1.0 / sample_rate)
        return gen_gaussian_process(psd, n, sample_rate, seed, real=model.real)
    if model.kind == "chirp":
        f0, f1, amp = model.chirp_params
        return gen_chirp(f0, f1, n, sample_rate, amplitude=amp, real=model.real)
    return gen_discrete(model.with_seed(seed), n, sample_rate)


def draw_pair(m1: SourceModel, m2: SourceModel, rho: float, n: int, sample_rate: float, seed: int):
    """Draw ``(x1, x2)`` with correlation ``rho`` injected between them.

    Gaussian pairs use ``x2 = rho*x1 + sqrt(1-rho^2)*z``. Alphabet pairs copy
    ``sign(rho)*x1`` into each sample of ``x2`` with probability ``|rho|``.
    """
    x1 = realize(m1, n, sample_rate, derive_seed(seed, 0))
    z = realize(m2, n, sample_rate, derive_seed(seed, 1))
    if rho == 0:
        return x1, z
    if m1.kind == m2.kind == "gaussian_psd":
        return x1, x1 * rho + z * np.sqrt(1.0 - rho * rho)
    if m1.kind == m2.kind == "discrete_alphabet":
        rng = np.random.default_rng(derive_seed(seed, 3))
        copy = rng.random(n) < abs(rho)
        return x1, z.with_samples(np.where(copy, np.sign(rho) * x1.samples, z.samples))
    raise UsageError("input correlation is only defined for Gaussian or alphabet pairs")


def analytic_signal(x: Signal) -> Signal:
    """One-sided-spectrum version of ``x``.

    Real input: negative DFT bins zeroed, interior positive bins doubled, DC
    and Nyquist bins kept, so the real part reproduces ``x``. Complex input
    is projected onto nonnegative frequencies without doubling, which makes
    the map idempotent; input that is already one-sided is returned as is.
    """
    n = len(x)
    X = np.fft.fft(x.samples)
    neg = X[n // 2 + 1:]
    if x.is_real:
        h = np.zeros(n)
        h[0] = h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        scale = np.max(np.abs(X)) if n else 0.0
        if scale == 0 or np.max(np.abs(neg), initial=0.0) <= 1e-12 * scale:
            return x
        h = np.ones(n)
        h[n // 2 + 1:] = 0.0
    return x.with_samples(np.fft.ifft(X * h))


def mix(x1: Signal, x2: Signal, snr: float, field_convention: str = "real", seed: int = 0) -> Signal:
    """Channel output ``y = sqrt(snr) * (x1 + x2) + n`` with unit-variance noise."""
    _check_compatible(x1, x2)
    if snr < 0:
        raise ConstructionError("snr must be >= 0")
    if field_convention not in FIELDS:
        raise ConstructionError(f"field_convention must be one of {FIELDS}")
    rng = np.random.default_rng(seed)
    n = len(x1)
    if field_convention == "real":
        noise = rng.standard_normal(n).astype(np.complex128)
    else:
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    return x1.with_samples(np.sqrt(snr) * (x1.samples + x2.samples) + noise)
