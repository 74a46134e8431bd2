"""Sub-Nyquist sampling: aliased conditional spectra and frequency-domain MMSE.

The conditional spectrum of ``X`` given samples of ``Y = X + noise`` taken at
rate ``fs_sub`` behind a pre-sampling filter ``H`` is

    S_{X|Y}(f) = sum_k S_X(f - k fs_sub)^2 |H(f - k fs_sub)|^2
                 / sum_k S_Y(f - k fs_sub) |H(f - k fs_sub)|^2

on ``f in [-fs_sub/2, fs_sub/2)``. The alias index is truncated at
``|k| <= alias_terms`` and ``SamplingSpec`` refuses truncations that would drop a
nonzero term for the declared band. Cells whose denominator is below
``EPS`` are unobserved and contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConstructionError, ShapeError
from .signals import SpectralDensity
from .tfa import TFDist

EPS = 1e-12
FILTER_KINDS = ("ideal_lowpass", "flat", "custom")


@dataclass(frozen=True, eq=False)
class SamplingFilter:
    """Pre-sampling filter response ``H(f)``.

    ``ideal_lowpass`` passes ``|f| < cutoff`` and has ``|H|^2 = 1/2`` exactly at
    ``|f| = cutoff``, so a band edge folded onto itself is counted once and
    symmetrically. ``flat`` has constant gain. ``custom`` interpolates
    ``grid_values`` on ``grid_freqs`` and is zero outside.
    """

    kind: str = "ideal_lowpass"
    cutoff: Optional[float] = None
    gain: float = 1.0
    grid_freqs: Optional[np.ndarray] = None
    grid_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ConstructionError(f"filter kind must be one of {FILTER_KINDS}")
        if self.kind == "ideal_lowpass" and (self.cutoff is None or not self.cutoff >= 0):
            raise ConstructionError("ideal_lowpass needs a cutoff >= 0")
        if not np.isfinite(self.gain):
            raise ConstructionError("filter gain must be finite")
        if self.kind == "custom":
            if self.grid_freqs is None or self.grid_values is None:
                raise ConstructionError("custom filter needs grid_freqs and grid_values")
            f = np.asarray(self.grid_freqs, dtype=float)
            v = np.asarray(self.grid_values, dtype=np.complex128)
            if f.shape != v.shape or f.size < 2 or np.any(np.diff(f) <= 0):
                raise ConstructionError("custom filter grid must be increasing and match its values")
            if not np.all(np.isfinite(v)):
                raise ConstructionError("|H(f)| must be finite")
            object.__setattr__(self, "grid_freqs", f)
            object.__setattr__(self, "grid_values", v)

    def power(self, f) -> np.ndarray:
        """``|H(f)|^2``."""
        f = np.asarray(f, dtype=float)
        if self.kind == "flat":
            return np.full(f.shape, abs(self.gain) ** 2)
        if self.kind == "ideal_lowpass":
            c = self.cutoff
            a = np.abs(f)
            tol = 1e-9 * max(c, 1e-300)
            return np.where(a < c - tol, 1.0, np.where(a <= c + tol, 0.5, 0.0)) * abs(self.gain) ** 2
        mag = np.abs(np.interp(f, self.grid_freqs, self.grid_values.real, left=0.0, right=0.0)
                     + 1j * np.interp(f, self.grid_freqs, self.grid_values.imag, left=0.0, right=0.0))
        return mag ** 2

    def support(self) -> float:
        """Largest ``|f|`` at which ``H`` can be nonzero."""
        if self.kind == "flat":
            return np.inf if self.gain != 0 else 0.0
        if self.kind == "ideal_lowpass":
            return self.cutoff if self.gain != 0 else 0.0
        nz = np.abs(self.grid_values) > 0
        return float(np.max(np.abs(self.grid_freqs[nz]))) if nz.any() else 0.0


def min_alias_terms(fs_sub: float, filt: SamplingFilter, band_limit: float) -> int:
    """Smallest ``K`` such that every dropped alias term is zero on the band."""
    s = min(band_limit, filt.support())
    return int(np.floor((s + fs_sub / 2) / fs_sub * (1 + 1e-12)))


@dataclass(frozen=True, eq=False)
class SamplingSpec:
    """Sub-Nyquist rate, pre-sampling filter and alias truncation."""

    fs_sub: float
    filter: SamplingFilter
    alias_terms: int = 1
    band_limit: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.fs_sub) and self.fs_sub > 0):
            raise ConstructionError("fs_sub must be finite and > 0")
        if int(self.alias_terms) != self.alias_terms or self.alias_terms < 1:
            raise ConstructionError("alias_terms must be an integer >= 1")
        object.__setattr__(self, "alias_terms", int(self.alias_terms))
        if self.band_limit is not None:
            self.check_support(self.band_limit)

    @classmethod
    def ideal(cls, fs_sub: float, cutoff: Optional[float] = None, band_limit: Optional[float] = None,
              alias_terms: Optional[int] = None) -> "SamplingSpec":
        """Ideal low-pass (cutoff defaults to ``fs_sub/2``) with minimal valid ``K``."""
        filt = SamplingFilter("ideal_lowpass", cutoff=fs_sub / 2 if cutoff is None else cutoff)
        if alias_terms is None:
            alias_terms = max(1, min_alias_terms(fs_sub, filt, np.inf if band_limit is None else band_limit))
        return cls(fs_sub, filt, alias_terms, band_limit)

    def check_support(self, band_limit: float) -> None:
        need = min_alias_terms(self.fs_sub, self.filter, band_limit)
        if need > self.alias_terms:
            raise ConstructionError(
                f"alias_terms={self.alias_terms} truncates nonzero terms; need >= {need} for band {band_limit}")

    def to_dict(self) -> dict:
        filt = {"kind": self.filter.kind}
        if self.filter.kind == "ideal_lowpass":
            filt["cutoff"] = self.filter.cutoff
        if self.filter.gain != 1.0:
            filt["gain"] = self.filter.gain
        if self.filter.kind == "custom":
            filt["grid"] = [[float(f), float(abs(v))] for f, v in zip(self.filter.grid_freqs, self.filter.grid_values)]
        return {"fs_sub": self.fs_sub, "filter": filt, "alias_terms": self.alias_terms}


def _band_plan(freqs: np.ndarray, spec: SamplingSpec):
    """Output offsets, alias source indices and ``|H|^2`` weights on ``freqs``."""
    df = float(freqs[1] - freqs[0])
    p = spec.fs_sub / df
    if abs(p - round(p)) > 1e-9 * max(1.0, p):
        raise ConstructionError("fs_sub must be an integer multiple of the grid step")
    p = int(round(p))
    if p < 2:
        raise ConstructionError("folded band [-fs_sub/2, fs_sub/2) holds fewer than two grid points")
    zero = int(np.argmin(np.abs(freqs)))
    if abs(freqs[zero]) > 1e-9 * df:
        raise ConstructionError("frequency grid must contain 0")
    j = np.arange(-(p // 2), (p + 1) // 2)
    k = np.arange(-spec.alias_terms, spec.alias_terms + 1)
    offs = j[:, None] - p * k[None, :]
    src = zero + offs
    inside = (src >= 0) & (src < freqs.size)
    h2 = spec.filter.power(offs * df) * inside
    return j * df, np.where(inside, src, 0), h2


def aliased_ratio(num: np.ndarray, den: np.ndarray, freqs: np.ndarray, spec: SamplingSpec):
    """Aliased ratio of ``num`` over ``den`` along the last axis.

    Returns ``(ratio, band_freqs, guarded)`` where ``guarded`` marks cells
    whose aliased denominator fell below ``EPS``.
    """
    band, src, h2 = _band_plan(np.asarray(freqs, dtype=float), spec)
    n_sum = np.sum(num[..., src] * h2, axis=-1)
    d_sum = np.sum(den[..., src] * h2, axis=-1)
    d_re = np.real(d_sum)
    guarded = d_re < EPS
    ratio = np.where(guarded, 0.0, n_sum / np.where(guarded, 1.0, d_re))
    return ratio, band, guarded


def fold_weights(den: np.ndarray, freqs: np.ndarray, spec: SamplingSpec):
    """Per-cell weights ``w`` with ``sum(aliased_ratio(num, den)) == sum(num * w)``.

    Folding is linear in the numerator, so the band-integrated ratio of any
    numerator is a weighted sum over the original grid. Returns
    ``(weights, guarded)`` with ``guarded`` on the folded band.
    """
    band, src, h2 = _band_plan(np.asarray(freqs, dtype=float), spec)
    d_re = np.real(np.sum(den[..., src] * h2, axis=-1))
    guarded = d_re < EPS
    inv = np.where(guarded, 0.0, 1.0 / np.where(guarded, 1.0, d_re))
    w = np.zeros(den.shape[:-1] + (np.asarray(freqs).size,))
    wt = np.moveaxis(w, -1, 0)  # view: accumulate along the frequency axis
    contrib = np.moveaxis(inv[..., None] * h2, (-2, -1), (0, 1))
    for kk in range(src.shape[1]):
        np.add.at(wt, src[:, kk], contrib[:, kk])
    return w, guarded


def conditional_psd(s_x: SpectralDensity, noise_psd: SpectralDensity, spec: SamplingSpec) -> SpectralDensity:
    """``S_{X|Y}`` on the folded band with ``S_Y = S_X + noise_psd``."""
    if not np.array_equal(s_x.freqs, noise_psd.freqs):
        raise ShapeError("signal and noise densities must share a grid")
    spec.check_support(float(np.max(np.abs(s_x.freqs))))
    sx = s_x.values
    ratio, band, _ = aliased_ratio(sx * sx, sx + noise_psd.values, s_x.freqs, spec)
    return SpectralDensity(band, np.real(ratio))


def conditional_wd(wv_x: TFDist, wv_y: TFDist, spec: SamplingSpec) -> TFDist:
    """Slicewise conditional spectrum with ``W_X(t, .)``, ``W_Y(t, .)`` in place of ``S_X``, ``S_Y``."""
    if not wv_x.same_grid(wv_y):
        raise ShapeError("wv_x and wv_y must share a grid")
    if wv_x.kind != "auto" or wv_y.kind != "auto":
        raise ShapeError("conditional_wd needs auto distributions")
    wx = wv_x.values.real
    ratio, band, _ = aliased_ratio(wx * wx, wv_y.values.real, wv_x.freq_axis, spec)
    return TFDist(ratio, wv_x.time_axis, band, "conditional")


def mmse_freq(s_x: SpectralDensity, s_x_given_y: SpectralDensity, spec: SamplingSpec) -> float:
    """Total power minus the power of the conditional spectrum (Riemann sums)."""
    if not np.isclose(s_x.df, s_x_given_y.df, rtol=1e-9):
        raise ShapeError("grids must share a step")
    return s_x.total_power() - reconstruction_energy(s_x_given_y, spec)


def reconstruction_energy(s_x_given_y: SpectralDensity, spec: SamplingSpec) -> float:
    """Power of the MMSE reconstruction: ``sum S_{X|Y} df`` over the folded band."""
    half = spec.fs_sub / 2
    f = s_x_given_y.freqs
    if f[0] < -half * (1 + 1e-9) or f[-1] >= half * (1 - 1e-12):
        raise ShapeError("conditional spectrum extends beyond the folded band")
    return s_x_given_y.total_power()
