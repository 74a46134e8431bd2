"""Term-by-term time-frequency I-MMSE functional for two-signal mixtures.

Each of the 18 terms is a Riemann sum over the time-frequency grid. Terms 1
and 6 integrate a self Wigner-Ville spectrum over the full band; the other 16
integrate a product numerator over ``W_y`` on the folded band
``[-fs_sub/2, fs_sub/2)``, aliased through the sampling filter exactly like
the conditional spectrum.

Symbol vocabulary used by :data:`TERM_TABLE`:

========  =====================================================
``W1``     ``W_{x1}(t, f)``
``W2``     ``W_{x2}(t, f)``
``W12``    ``W_{x1 x2}(t, f)``
``W21``    ``W_{x2 x1}(t, f) = conj(W12(t, f))``
``W1c2c``  ``W_{x1* x2*}(t, f) = conj(W12(t, -f))``
``W2c1c``  ``W_{x2* x1*}(t, f) = W12(t, -f)``
========  =====================================================

Index table (sign, numerator, band):

==  ====  ================  =======
 1   +    W1                full
 2   -    W1 (W1*W1)        folded
 3   -    W12               folded
 4   -    W12*W1            folded
 5   -    W1*W1c2c          folded
 6   +    W2                full
 7   -    W2 (W2*W2)        folded
 8   -    W21               folded
 9   -    W21*W2            folded
10   -    W2*W2c1c          folded
11   -    W1*W2             folded
12   -    W1*W2c1c          folded
13   -    W12*W2c1c         folded
14   -    W12*W2            folded
15   -    W2*W1             folded
16   -    W2*W12            folded
17   -    W21*W2c1c         folded
18   -    W21*W1            folded
==  ====  ================  =======

Terms 2 and 7 use the squared self numerator under the default
``squared_numerator`` variant and the single factor under ``literal``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ShapeError, UsageError
from .sampling import SamplingSpec, aliased_ratio, fold_weights
from .signals import SourceModel, derive_seed, draw_pair, analytic_signal, mix, dft_freqs
from .tfa import TFDist, lag_to_tf, upsample2

VARIANTS = ("squared_numerator", "literal")
REDUCTIONS = ("none", "independent", "real")
CROSS_SYMBOLS = frozenset({"W12", "W21", "W1c2c", "W2c1c"})


@dataclass(frozen=True)
class TermSpec:
    index: int
    sign: int
    factors: tuple
    band: str
    squared: Optional[tuple] = None

    def numerator(self, variant: str) -> tuple:
        if variant == "squared_numerator" and self.squared is not None:
            return self.squared
        return self.factors


TERM_TABLE = (
    TermSpec(1, +1, ("W1",), "full"),
    TermSpec(2, -1, ("W1",), "folded", ("W1", "W1")),
    TermSpec(3, -1, ("W12",), "folded"),
    TermSpec(4, -1, ("W12", "W1"), "folded"),
    TermSpec(5, -1, ("W1", "W1c2c"), "folded"),
    TermSpec(6, +1, ("W2",), "full"),
    TermSpec(7, -1, ("W2",), "folded", ("W2", "W2")),
    TermSpec(8, -1, ("W21",), "folded"),
    TermSpec(9, -1, ("W21", "W2"), "folded"),
    TermSpec(10, -1, ("W2", "W2c1c"), "folded"),
    TermSpec(11, -1, ("W1", "W2"), "folded"),
    TermSpec(12, -1, ("W1", "W2c1c"), "folded"),
    TermSpec(13, -1, ("W12", "W2c1c"), "folded"),
    TermSpec(14, -1, ("W12", "W2"), "folded"),
    TermSpec(15, -1, ("W2", "W1"), "folded"),
    TermSpec(16, -1, ("W2", "W12"), "folded"),
    TermSpec(17, -1, ("W21", "W2c1c"), "folded"),
    TermSpec(18, -1, ("W21", "W1"), "folded"),
)

# terms whose numerators carry no cross distribution
INDEPENDENT_SUBSET = tuple(t.index for t in TERM_TABLE if not CROSS_SYMBOLS.intersection(t.factors))

# real-input grouping: (label, source indices, printed coefficient, printed numerator)
REAL_GROUPS = (
    ("A", (1,), 1, ("W1",)),
    ("B", (2,), 1, None),
    ("C", (6,), 1, ("W2",)),
    ("D", (7,), 1, None),
    ("E", (3, 8), 2, ("W12",)),
    ("F", (4, 5, 12, 18), 4, ("W12", "W1")),
    ("G", (9, 10, 14, 16), 4, ("W12", "W2")),
    ("H", (11, 15), 2, ("W1", "W2")),
    ("I", (13, 17), 2, ("W21", "W21")),
)


def _variant(variant: str) -> str:
    if variant == "squared":
        return "squared_numerator"
    if variant not in VARIANTS:
        raise UsageError(f"variant must be one of {VARIANTS}")
    return variant


@dataclass(frozen=True)
class ImmseTerm:
    """One evaluated term; ``value`` is unsigned, the signed contribution is ``sign * value``."""

    index: int
    sign: int
    numerator_spec: tuple
    band: str
    value: complex

    @property
    def signed(self) -> complex:
        return self.sign * self.value

    @property
    def cross_free(self) -> bool:
        return not CROSS_SYMBOLS.intersection(self.numerator_spec)

    def to_dict(self) -> dict:
        return {"index": self.index, "sign": self.sign, "numerator": list(self.numerator_spec),
                "band": self.band, "re": float(self.value.real), "im": float(self.value.imag)}


@dataclass(frozen=True, eq=False)
class TfImmseReport:
    terms: tuple
    total: complex
    reduced_total: complex
    variant: str
    reduction: str = "none"
    guarded_cells: int = 0
    n_cells: int = 0
    real_inputs: bool = True
    groups: Optional[tuple] = None
    bootstrap: Optional[dict] = None
    inputs_meta: dict = field(default_factory=dict)

    def term(self, index: int) -> ImmseTerm:
        return self.terms[index - 1]

    def signed_values(self) -> np.ndarray:
        return np.array([t.signed for t in self.terms], dtype=np.complex128)

    def to_dict(self) -> dict:
        d = {
            "variant": self.variant,
            "reduction": self.reduction,
            "terms": [t.to_dict() for t in self.terms],
            "total": [float(self.total.real), float(self.total.imag)],
            "reduced_total": [float(self.reduced_total.real), float(self.reduced_total.imag)],
            "guarded_cells": int(self.guarded_cells),
            "n_cells": int(self.n_cells),
            "real_inputs": bool(self.real_inputs),
            "inputs_meta": self.inputs_meta,
        }
        if self.groups is not None:
            d["groups"] = list(self.groups)
        if self.bootstrap is not None:
            d["bootstrap"] = self.bootstrap
        return d


def symbol_grids(w1: np.ndarray, w2: np.ndarray, w12: np.ndarray) -> dict:
    """All six distributions of the vocabulary from the three primitive grids."""
    n = w12.shape[-1]
    neg = (-np.arange(n)) % n
    w12m = w12[..., neg]
    return {"W1": w1, "W2": w2, "W12": w12, "W21": np.conj(w12),
            "W1c2c": np.conj(w12m), "W2c1c": w12m}


def _product(sym: dict, factors: Sequence[str]) -> np.ndarray:
    out = sym[factors[0]]
    for f in factors[1:]:
        out = out * sym[f]
    return out


def _term_values(w1, w2, w12, wy, freqs, dt, spec: SamplingSpec, variant: str):
    """Unsigned values of all 18 terms and the guarded cell count."""
    df = float(freqs[1] - freqs[0])
    sym = symbol_grids(w1, w2, w12)
    folded = [t for t in TERM_TABLE if t.band == "folded"]
    weights, guarded = fold_weights(wy.real, freqs, spec)
    folded_vals = [np.vdot(weights, _product(sym, t.numerator(variant))) * dt * df for t in folded]
    out = np.empty(len(TERM_TABLE), dtype=np.complex128)
    k = 0
    for i, t in enumerate(TERM_TABLE):
        if t.band == "full":
            out[i] = sym[t.factors[0]].sum() * dt * df
        else:
            out[i] = folded_vals[k]
            k += 1
    return out, int(guarded.sum()), int(guarded.size)


def _report(values, guarded, n_cells, variant, real_inputs, meta, bootstrap=None) -> TfImmseReport:
    terms = tuple(
        ImmseTerm(t.index, t.sign, t.numerator(variant), t.band, complex(v))
        for t, v in zip(TERM_TABLE, values)
    )
    total = complex(sum(t.signed for t in terms))
    return TfImmseReport(terms, total, total, variant, "none", guarded, n_cells, real_inputs,
                         None, bootstrap, dict(meta or {}))


def evaluate_terms(wv_x1: TFDist, wv_x2: TFDist, wv_cross12: TFDist, wv_y: TFDist,
                   spec: Optional[SamplingSpec] = None, variant: str = "squared_numerator",
                   complex_inputs: bool = False, meta: Optional[dict] = None) -> TfImmseReport:
    """Evaluate the 18 terms on a common grid.

    ``spec`` defaults to an ideal low-pass at ``fs/2`` sampled at ``fs``, i.e.
    no folding beyond the grid itself. ``complex_inputs`` records the
    provenance of the distributions; :func:`reduce_real` refuses reports
    built from complex inputs.
    """
    variant = _variant(variant)
    grids = (wv_x1, wv_x2, wv_cross12, wv_y)
    if not all(wv_x1.same_grid(g) for g in grids[1:]):
        raise ShapeError("all distributions must share one time-frequency grid")
    freqs = wv_x1.freq_axis
    if spec is None:
        fs = wv_x1.df * freqs.size
        spec = SamplingSpec.ideal(fs)
    vals, guarded, cells = _term_values(wv_x1.values.real, wv_x2.values.real, wv_cross12.values,
                                        wv_y.values.real, freqs, wv_x1.dt, spec, variant)
    meta = dict(meta or {})
    meta.setdefault("sampling", spec.to_dict())
    return _report(vals, guarded, cells, variant, not complex_inputs, meta)


def reduce_independent(report: TfImmseReport) -> TfImmseReport:
    """Keep only the cross-free terms {1, 2, 6, 7, 11, 15} in ``reduced_total``."""
    red = complex(sum(report.term(i).signed for i in INDEPENDENT_SUBSET))
    return replace(report, reduced_total=red, reduction="independent", groups=None)


def real_groups(report: TfImmseReport, printed: Optional[dict] = None) -> tuple:
    """Grouped aggregates of the real-input display.

    Each group value is the signed sum of its source terms. ``printed`` maps a
    group label to the directly evaluated printed expression, when available.
    """
    out = []
    for label, sources, coef, _ in REAL_GROUPS:
        v = complex(sum(report.term(i).signed for i in sources))
        g = {"label": label, "sources": list(sources), "coefficient": coef,
             "re": float(v.real), "im": float(v.imag)}
        if printed and label in printed:
            p = printed[label]
            g["printed_re"], g["printed_im"] = float(p.real), float(p.imag)
        out.append(g)
    return tuple(out)


def reduce_real(report: TfImmseReport, printed: Optional[dict] = None) -> TfImmseReport:
    """Regroup conjugate-pair terms into the real-input 2Re/4Re aggregates."""
    if not report.real_inputs:
        raise UsageError("real-input regrouping needs real-valued inputs")
    groups = real_groups(report, printed)
    red = complex(sum(complex(g["re"], g["im"]) for g in groups))
    return replace(report, reduced_total=red, reduction="real", groups=groups)


def printed_real_groups(wv_x1: TFDist, wv_x2: TFDist, wv_cross12: TFDist, wv_y: TFDist,
                        spec: Optional[SamplingSpec] = None, variant: str = "squared_numerator") -> dict:
    """Directly evaluated ``-coef * Re{integral}`` forms of the grouped display.

    For real inputs these equal the grouped source sums except group ``I``,
    whose printed form ``2 Re{W21^2}`` differs from its sources
    ``W12 W2c1c + W21 W2c1c = |W12|^2 + W21^2``.
    """
    variant = _variant(variant)
    freqs = wv_x1.freq_axis
    if spec is None:
        spec = SamplingSpec.ideal(wv_x1.df * freqs.size)
    sym = symbol_grids(wv_x1.values.real, wv_x2.values.real, wv_cross12.values)
    dt, df = wv_x1.dt, wv_x1.df
    out = {}
    for label, sources, coef, factors in REAL_GROUPS:
        if factors is None:
            factors = TERM_TABLE[sources[0] - 1].numerator(variant)
            full = False
        else:
            full = label in ("A", "C")
        if full:
            out[label] = complex(_product(sym, factors).sum() * dt * df)
            continue
        r, _, _ = aliased_ratio(_product(sym, factors), wv_y.values.real, freqs, spec)
        val = complex(r.sum() * dt * df)
        out[label] = -coef * val.real if coef > 1 else -val
    return out


# -- ensembles and bootstrap -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnsembleSpectra:
    """Block means of ``W_{x1}``, ``W_{x2}``, ``W_{x1x2}`` and ``W_y`` over realizations.

    ``blocks[b]`` has shape ``(4, N, N)``; ``counts[b]`` is its realization
    count. The ensemble mean is the count-weighted block mean.
    """

    blocks: np.ndarray
    counts: np.ndarray
    time_axis: np.ndarray
    freq_axis: np.ndarray
    real_inputs: bool
    meta: dict

    def mean(self, idx: Optional[np.ndarray] = None) -> np.ndarray:
        if idx is None:
            idx = np.arange(self.counts.size)
        w = self.counts[idx].astype(float)
        return np.tensordot(w, self.blocks[idx], axes=1) / w.sum()

    def distributions(self, idx: Optional[np.ndarray] = None) -> tuple:
        m = self.mean(idx)
        t, f = self.time_axis, self.freq_axis
        return (TFDist(m[0].real, t, f, "auto"), TFDist(m[1].real, t, f, "auto"),
                TFDist(m[2], t, f, "cross"), TFDist(m[3].real, t, f, "auto"))


def ensemble_spectra(m1: SourceModel, m2: SourceModel, snr: float, n: int, n_realizations: int, seed: int,
                     rho: float = 0.0, sample_rate: float = 1.0, analytic: bool = False,
                     n_blocks: int = 20) -> EnsembleSpectra:
    """Wigner-Ville spectra of the inputs, their cross and the observation.

    ``W_y`` is taken of the SNR-normalized observation
    ``y / sqrt(snr) = x1 + x2 + n / sqrt(snr)`` so that it shares the units
    of the input spectra. Realization ``r`` uses ``derive_seed(seed, r)``.
    """
    if snr <= 0:
        raise UsageError("snr must be > 0")
    if n_realizations < 1:
        raise UsageError("n_realizations must be >= 1")
    n_blocks = max(1, min(n_blocks, n_realizations))
    real = m1.real and m2.real and not analytic
    fieldc = "real" if (m1.real and m2.real) else "complex_circular"
    blocks = np.zeros((n_blocks, 4, n, n), dtype=np.complex128)
    counts = np.zeros(n_blocks, dtype=int)
    acc = np.zeros((4, n, n), dtype=np.complex128)
    scale = 1.0 / np.sqrt(snr)
    for r in range(n_realizations):
        b = r * n_blocks // n_realizations
        rs = derive_seed(seed, r)
        x1, x2 = draw_pair(m1, m2, rho, n, sample_rate, derive_seed(rs, 0))
        y = mix(x1, x2, snr, fieldc, derive_seed(rs, 1)) * scale
        if analytic:
            x1, x2, y = analytic_signal(x1), analytic_signal(x2), analytic_signal(y)
        u1, u2, uy = upsample2(x1.samples), upsample2(x2.samples), upsample2(y.samples)
        kernels.accumulate_lag_products(u1, u1, acc[0], False, 1.0)
        kernels.accumulate_lag_products(u2, u2, acc[1], False, 1.0)
        kernels.accumulate_lag_products(u1, u2, acc[2], False, 1.0)
        kernels.accumulate_lag_products(uy, uy, acc[3], False, 1.0)
        counts[b] += 1
        if r + 1 == n_realizations or (r + 1) * n_blocks // n_realizations != b:
            blocks[b] = lag_to_tf(acc.reshape(4 * n, n), 1.0 / sample_rate).reshape(4, n, n) / counts[b]
            acc[:] = 0
    meta = {"n": n, "n_realizations": n_realizations, "seed": int(seed), "snr": snr, "rho": rho,
            "sample_rate": sample_rate, "analytic": analytic, "n_blocks": n_blocks, "field_convention": fieldc}
    return EnsembleSpectra(blocks, counts, np.arange(n) / sample_rate, dft_freqs(n, sample_rate), real, meta)


def _complex_std(v: np.ndarray, axis=0) -> np.ndarray:
    return np.sqrt(np.var(v.real, axis=axis, ddof=1) + np.var(v.imag, axis=axis, ddof=1))


def _half_width(v: np.ndarray, axis=0) -> np.ndarray:
    """Half the central 68% interval, combined over real and imaginary parts."""
    def hw(a):
        lo, hi = np.percentile(a, [15.865, 84.135], axis=axis)
        return (hi - lo) / 2
    return np.hypot(hw(v.real), hw(v.imag))


def bootstrap_terms(ens: EnsembleSpectra, spec: SamplingSpec, variant: str = "squared_numerator",
                    n_resamples: int = 200, seed: int = 0) -> dict:
    """Block-bootstrap standard errors of the term values and aggregates.

    Each resample draws the realization blocks with replacement and
    re-evaluates every term on the resampled ensemble mean. ``*_stderr`` are
    standard deviations over resamples. Ratio terms are heavy-tailed (cells
    where the resampled ``W_y`` nears zero), so the central-68% half widths
    are reported as well under ``*_halfwidth``.
    """
    variant = _variant(variant)
    rng = np.random.default_rng(derive_seed(seed, 0xB007))
    nb = ens.counts.size
    if nb < 2:
        raise UsageError("bootstrap needs at least two realization blocks")
    dt = float(ens.time_axis[1] - ens.time_axis[0])
    vals = np.empty((n_resamples, len(TERM_TABLE)), dtype=np.complex128)
    for b in range(n_resamples):
        m = ens.mean(rng.integers(0, nb, nb))
        vals[b], _, _ = _term_values(m[0].real, m[1].real, m[2], m[3].real, ens.freq_axis, dt, spec, variant)
    signs = np.array([t.sign for t in TERM_TABLE])
    signed = vals * signs
    keep = np.isin([t.index for t in TERM_TABLE], INDEPENDENT_SUBSET)
    total = signed.sum(axis=1)
    gap = signed[:, ~keep].sum(axis=1)
    return {
        "n_resamples": int(n_resamples),
        "n_blocks": int(nb),
        "term_stderr": [float(v) for v in _complex_std(vals)],
        "total_stderr": float(_complex_std(total)),
        "independent_gap_stderr": float(_complex_std(gap)),
        "term_halfwidth": [float(v) for v in _half_width(vals)],
        "total_halfwidth": float(_half_width(total)),
        "independent_gap_halfwidth": float(_half_width(gap)),
    }


def tf_immse_derivative(models: Sequence[SourceModel], spec: Optional[SamplingSpec] = None, snr: float = 1.0,
                        n_realizations: int = 500, seed: int = 0, variant: str = "squared_numerator",
                        reduction: str = "none", n: int = 256, rho: float = 0.0, sample_rate: float = 1.0,
                        analytic: bool = False, n_resamples: int = 200, n_blocks: int = 20,
                        min_realizations: int = 100):
    """Full pipeline: ensembles, terms, reduction; returns ``(Re reduced_total, report)``.

    Ratio terms need ensemble spectra; fewer than ``min_realizations``
    realizations is refused. ``n_resamples = 0`` skips the bootstrap.
    """
    if len(models) != 2:
        raise UsageError("exactly two source models are required")
    if reduction not in REDUCTIONS:
        raise UsageError(f"reduction must be one of {REDUCTIONS}")
    if n_realizations < min_realizations:
        raise UsageError(f"ratio terms need >= {min_realizations} realizations")
    variant = _variant(variant)
    ens = ensemble_spectra(models[0], models[1], snr, n, n_realizations, seed, rho, sample_rate, analytic, n_blocks)
    if spec is None:
        spec = SamplingSpec.ideal(sample_rate)
    dists = ens.distributions()
    meta = {"ensemble": ens.meta, "sampling": spec.to_dict(),
            "models": [m.kind for m in models]}
    rep = evaluate_terms(*dists, spec=spec, variant=variant, complex_inputs=not ens.real_inputs, meta=meta)
    if n_resamples:
        rep = replace(rep, bootstrap=bootstrap_terms(ens, spec, variant, n_resamples, seed))
    if reduction == "independent":
        rep = reduce_independent(rep)
    elif reduction == "real":
        rep = reduce_real(rep, printed_real_groups(*dists, spec=spec, variant=variant))
    return float(rep.reduced_total.real), rep
