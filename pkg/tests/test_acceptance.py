"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <n> PASS|FAIL`` line with the measured
quantity (visible with ``pytest -s``) and asserts at the stated tolerance.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from tfimmse.cli import main
from tfimmse.estimation import ConditionalEstimator, gaussian_closed_form, immse_sweep, mutual_info
from tfimmse.sampling import SamplingSpec, conditional_psd, mmse_freq
from tfimmse.signals import Signal, SourceModel, SpectralDensity, analytic_signal, derive_seed, gen_chirp
from tfimmse.tf_immse import (INDEPENDENT_SUBSET, TERM_TABLE, evaluate_terms, reduce_independent, reduce_real,
                              tf_immse_derivative)
from tfimmse.tfa import cross_wigner, lag_matrix, lag_to_tf, mixture_wd_residuals, wigner

from test_sampling import wiener_mmse_covariance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def report(n, ok, detail):
    print(f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _analytic(n, seed):
    rng = np.random.default_rng(seed)
    return analytic_signal(Signal(rng.standard_normal(n)))


def test_criterion_1_wd_properties():
    n = 256
    sl = slice(n // 4, 3 * n // 4)
    worst = {"marginal": 0.0, "energy": 0.0, "realness": 0.0}
    for i in range(50):
        x = _analytic(n, derive_seed(101, i))
        w = lag_to_tf(lag_matrix(x, x), x.dt)
        inst = np.abs(x.samples[sl]) ** 2
        marg = np.sum(w.real[sl], axis=1) * (x.sample_rate / n)
        worst["marginal"] = max(worst["marginal"], float(np.max(np.abs(marg - inst) / inst)))
        e = np.sum(w.real) * x.dt * (x.sample_rate / n)
        worst["energy"] = max(worst["energy"], abs(e - x.energy() * x.dt) / (x.energy() * x.dt))
        worst["realness"] = max(worst["realness"], float(np.max(np.abs(w.imag)) / np.max(np.abs(w))))
    report(1, all(v <= 1e-9 for v in worst.values()), worst)


def test_criterion_2_mixture_identity():
    worst_plus, min_minus = 0.0, np.inf
    for i in range(50):
        x1 = _analytic(256, derive_seed(202, i, 1))
        x2 = _analytic(256, derive_seed(202, i, 2))
        r = mixture_wd_residuals(x1, x2)
        worst_plus = max(worst_plus, r["plus"] / r["scale"])
        min_minus = min(min_minus, r["minus"] / r["scale"])
    # the "minus" form is reported: it fails by an O(1) relative amount
    report(2, worst_plus <= 1e-9, {"plus_rel": worst_plus, "minus_rel_min": min_minus})


def test_criterion_3_single_user_gsv():
    g = ConditionalEstimator(SourceModel.gaussian(), 1.0, "real")
    worst_g = 0.0
    for s in (0.5, 1.0, 2.0, 5.0):
        d = min(1e-3, s / 2)
        dmi = (mutual_info(g.at_snr(s + d))[0] - mutual_info(g.at_snr(s - d))[0]) / (2 * d)
        worst_g = max(worst_g, abs(dmi - 0.5 * gaussian_closed_form(g.at_snr(s))["mmse"][0]))
    b = ConditionalEstimator(SourceModel.bpsk(), 1.0, "real")
    r = immse_sweep(b, [0.5, 1.0, 2.0, 5.0], n_samples=1_000_000, seed=303, mi_method="quadrature")
    viol = r.max_violation(2e-3)
    report(3, worst_g <= 2e-3 and viol <= 0,
           {"gaussian_max_residual": worst_g, "bpsk_residuals": r.residual.tolist(),
            "bpsk_stderr": r.mc_stderr.tolist()})


def test_criterion_4_two_user_decomposition():
    est = ConditionalEstimator(SourceModel.gaussian(), 1.0, "real", 2, 0.0)
    r = immse_sweep(est, [0.5, 1.0, 1.5], n_samples=1_000_000, seed=404, mi_method="monte_carlo")
    i = 1
    checks = {
        "dmi": abs(r.dmi_dsnr[i] - 1 / 3) <= 3 * r.dmi_stderr[i],
        "mmse1": abs(r.mmse[i, 0] - 2 / 3) <= 3 * r.mmse_stderr[i, 0],
        "mmse2": abs(r.mmse[i, 1] - 2 / 3) <= 3 * r.mmse_stderr[i, 1],
        "psi12": abs(r.psi12[i] + 1 / 3) <= 3 * r.psi_stderr[i],
        "psi21": abs(r.psi21[i] + 1 / 3) <= 3 * r.psi_stderr[i],
        "residual": abs(r.residual[i]) <= 2e-3 + 3 * r.mc_stderr[i],
    }
    est5 = ConditionalEstimator(SourceModel.gaussian(), 1.0, "real", 2, 0.5)
    r5 = immse_sweep(est5, [0.5, 1.0, 1.5], n_samples=1_000_000, seed=405, mi_method="monte_carlo")
    cf = gaussian_closed_form(est5)
    checks.update({
        "rho.5_dmi": abs(r5.dmi_dsnr[i] - cf["dmi"]) <= 3 * r5.dmi_stderr[i],
        "rho.5_mmse": all(abs(r5.mmse[i, k] - cf["mmse"][k]) <= 3 * r5.mmse_stderr[i, k] for k in range(2)),
        "rho.5_psi": abs(r5.psi12[i] - cf["psi12"]) <= 3 * r5.psi_stderr[i],
        "rho.5_residual": abs(r5.residual[i]) <= 2e-3 + 3 * r5.mc_stderr[i],
    })
    report(4, all(checks.values()), {k: bool(v) for k, v in checks.items()})


def test_criterion_5_conditional_psd():
    n = 256
    zero = SpectralDensity.on_dft_grid(n, 1.0, 0.0)
    tri = SpectralDensity.triangle(n, 1.0, 0.125)
    spec = SamplingSpec.ideal(1.0)
    c = conditional_psd(tri, zero, spec)
    nyq_err = float(np.max(np.abs(c.values - tri.values)))
    nyq_mmse = mmse_freq(tri, c, spec)
    w = 0.125
    flat = SpectralDensity.lowpass(n, 1.0, w)
    half = conditional_psd(flat, zero, SamplingSpec.ideal(w, cutoff=w))
    half_err = float(np.max(np.abs(half.values - (1 + 1) / (1 + 1))))
    spec_w = SamplingSpec.ideal(w, cutoff=w, band_limit=0.5)
    value = mmse_freq(tri, conditional_psd(tri, zero, spec_w), spec_w)
    oracle = wiener_mmse_covariance(tri, np.sqrt(spec_w.filter.power(tri.freqs)), 8)
    rel = abs(value - oracle) / oracle
    ok = nyq_err <= 1e-12 and nyq_mmse <= 1e-9 and half_err <= 1e-12 and rel <= 0.05
    report(5, ok, {"nyquist_err": nyq_err, "nyquist_mmse": nyq_mmse, "half_nyquist_err": half_err,
                   "wiener_value": value, "wiener_oracle": oracle, "wiener_rel": rel})


def test_criterion_6_tf_structure():
    n_terms = len(TERM_TABLE)
    free = tuple(t.index for t in TERM_TABLE
                 if not {"W12", "W21", "W1c2c", "W2c1c"}.intersection(t.factors))
    g = SourceModel.gaussian()
    _, rep = tf_immse_derivative([g, g], snr=1.0, n=256, n_realizations=500, seed=606)
    signed_rel = abs(sum(t.sign * t.value for t in rep.terms) - rep.total) / abs(rep.total)
    se = rep.bootstrap["term_stderr"]
    excluded_ok = all(abs(t.value) <= 3 * se[i] for i, t in enumerate(rep.terms) if t.index not in INDEPENDENT_SUBSET)
    red = reduce_independent(rep)
    gap = abs(red.reduced_total - rep.total)
    gap_ok = gap <= 3 * rep.bootstrap["independent_gap_stderr"]
    x1 = gen_chirp(0.05, 0.3, 256, 1.0, real=True)
    x2 = gen_chirp(0.35, 0.1, 256, 1.0, real=True)
    y = x1 + x2 + Signal(0.3 * np.random.default_rng(6).standard_normal(256))
    rr = reduce_real(evaluate_terms(wigner(x1), wigner(x2), cross_wigner(x1, x2), wigner(y)))
    real_rel = abs(rr.reduced_total - rr.total) / abs(rr.total)
    ok = (n_terms == 18 and signed_rel <= 1e-12 and free == INDEPENDENT_SUBSET == (1, 2, 6, 7, 11, 15)
          and excluded_ok and gap_ok and real_rel <= 1e-9)
    report(6, ok, {"n_terms": n_terms, "signed_rel": signed_rel, "subset": free, "excluded_ok": excluded_ok,
                   "gap": gap, "gap_bound": 3 * rep.bootstrap["independent_gap_stderr"],
                   "gap_bound_68pct": 3 * rep.bootstrap["independent_gap_halfwidth"], "real_rel": real_rel})


RUNS = [("wd", "wd_chirp.toml"), ("sampling", "sampling_triangle.toml"), ("immse", "immse_gaussian_pair.toml"),
        ("tfimmse", "tfimmse_chirps_real.toml"), ("tfimmse", "tfimmse_x2_off.json")]


def test_criterion_7_reproducibility(tmp_path):
    mismatched = []
    for k, (cmd, cfg) in enumerate(RUNS):
        first = tmp_path / f"{k}a"
        assert main([cmd, "--config", str(CONFIGS / cfg), "--out", str(first)]) == 0
        second = tmp_path / f"{k}b"
        assert main([cmd, "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
        files = [p.name for p in first.iterdir() if p.suffix in (".csv", ".json") and p.name != "manifest.json"]
        for name in files:
            if (first / name).read_bytes() != (second / name).read_bytes():
                mismatched.append(f"{cmd}/{name}")
        m1, m2 = json.loads((first / "manifest.json").read_text()), json.loads((second / "manifest.json").read_text())
        if m1["config"] | {"out": None} != m2["config"] | {"out": None}:
            mismatched.append(f"{cmd}/manifest.config")
    report(7, not mismatched, {"runs": len(RUNS), "mismatched": mismatched})
