"""Quick property suite behind ``tfimmse validate``.

Each check returns ``(name, passed, detail)``. Sizes are kept small so the
whole suite runs in a few seconds; the test suite covers the full-scale
versions.
"""

from __future__ import annotations

import numpy as np

from .estimation import ConditionalEstimator, gaussian_closed_form, mutual_info
from .sampling import SamplingSpec, conditional_psd, mmse_freq
from .signals import Signal, SourceModel, SpectralDensity, analytic_signal, derive_seed, gen_chirp
from .tf_immse import INDEPENDENT_SUBSET, TERM_TABLE, evaluate_terms, reduce_real
from .tfa import cross_wigner, mixture_wd_residuals, wd_property_residuals, wigner

TOL = 1e-9


def _random_analytic(n: int, seed: int) -> Signal:
    rng = np.random.default_rng(seed)
    return analytic_signal(Signal(rng.standard_normal(n), 1.0))


def check_wd_properties(seed: int = 0, count: int = 10, n: int = 128):
    worst = {"marginal": 0.0, "energy": 0.0, "realness": 0.0}
    for i in range(count):
        r = wd_property_residuals(_random_analytic(n, derive_seed(seed, i)))
        worst = {k: max(worst[k], r[k]) for k in worst}
    return "wd_properties", all(v <= TOL for v in worst.values()), worst


def check_mixture(seed: int = 0, count: int = 10, n: int = 128):
    worst = 0.0
    for i in range(count):
        x1 = _random_analytic(n, derive_seed(seed, i, 1))
        x2 = _random_analytic(n, derive_seed(seed, i, 2))
        r = mixture_wd_residuals(x1, x2)
        worst = max(worst, r["plus"] / r["scale"])
    return "mixture_identity", worst <= TOL, {"relative_residual": worst}


def check_gsv_gaussian():
    g = SourceModel.gaussian()
    worst = 0.0
    for field in ("real", "complex_circular"):
        for n_in, rho in ((1, 0.0), (2, 0.0), (2, 0.5), (2, 1.0)):
            for s in (0.5, 1.0, 2.0, 5.0):
                est = ConditionalEstimator(g, s, field, n_in, rho)
                d = 1e-3
                dmi = (mutual_info(est.at_snr(s + d))[0] - mutual_info(est.at_snr(s - d))[0]) / (2 * d)
                cf = gaussian_closed_form(est)
                rhs = est.c * (sum(cf["mmse"]) + 2 * cf["psi12"])
                worst = max(worst, abs(dmi - rhs))
    return "immse_gaussian", worst <= 2e-3, {"max_residual": worst}


def check_quadrature():
    worst = 0.0
    for model, field in ((SourceModel.bpsk(), "real"), (SourceModel.qpsk(), "complex_circular")):
        est = ConditionalEstimator(model, 1.0, field)
        a = mutual_info(est, "quadrature", order=64)[0]
        b = mutual_info(est, "quadrature", order=128)[0]
        worst = max(worst, abs(a - b))
    return "quadrature_convergence", worst < 1e-10, {"order_doubling_change": worst}


def check_conditional_psd(n: int = 256):
    sx = SpectralDensity.triangle(n, 1.0, 0.25)
    noise = SpectralDensity.on_dft_grid(n, 1.0, np.zeros(n))
    spec = SamplingSpec.ideal(1.0)
    c = conditional_psd(sx, noise, spec)
    err = float(np.max(np.abs(c.values - sx.values)))
    m = mmse_freq(sx, c, spec)
    return "conditional_psd_nyquist", err <= 1e-12 and m <= TOL, {"max_error": err, "mmse": m}


def check_term_structure(n: int = 128):
    x1 = gen_chirp(0.05, 0.3, n, 1.0, real=True)
    x2 = gen_chirp(0.35, 0.1, n, 1.0, real=True)
    r = evaluate_terms(wigner(x1), wigner(x2), cross_wigner(x1, x2), wigner(x1 + x2))
    idx = [t.index for t in r.terms]
    signed = complex(sum(t.signed for t in r.terms))
    rel = abs(signed - r.total) / max(abs(r.total), 1e-300)
    g = reduce_real(r)
    rel_real = abs(g.reduced_total - r.total) / max(abs(r.total), 1e-300)
    free = tuple(t.index for t in TERM_TABLE if all(f in ("W1", "W2") for f in t.factors))
    ok = (idx == list(range(1, 19)) and rel <= 1e-12 and rel_real <= TOL
          and free == INDEPENDENT_SUBSET == (1, 2, 6, 7, 11, 15))
    return "tf_term_structure", ok, {"n_terms": len(idx), "signed_sum_rel": rel, "real_grouping_rel": rel_real,
                                     "independent_subset": list(INDEPENDENT_SUBSET)}


def run_all(seed: int = 0) -> list:
    return [
        check_wd_properties(seed),
        check_mixture(seed),
        check_gsv_gaussian(),
        check_quadrature(),
        check_conditional_psd(),
        check_term_structure(),
    ]
