import numpy as np
import pytest
from hypothesis import given, strategies as st

from tfimmse.errors import ConstructionError, ShapeError, UsageError
from tfimmse.signals import (MixtureChannel, Signal, SourceModel, SpectralDensity, analytic_signal, derive_seed,
                             dft_freqs, draw_pair, gen_chirp, gen_discrete, gen_gaussian_process, mix, realize)
from tfimmse.tfa import psd

from conftest import random_signal


# -- Signal --------------------------------------------------------------------

@pytest.mark.parametrize("n", [0, 1, 3, 255])
def test_signal_rejects_odd_or_short(n):
    with pytest.raises(ConstructionError):
        Signal(np.ones(n))


@pytest.mark.parametrize("fs", [0.0, -1.0, np.inf, np.nan])
def test_signal_rejects_bad_rate(fs):
    with pytest.raises(ConstructionError):
        Signal(np.ones(4), fs)


def test_signal_basic_accessors():
    x = Signal([1, 2j, -1, 0], 4.0, t0=0.5)
    assert len(x) == 4
    assert x.dt == 0.25
    np.testing.assert_allclose(x.times, [0.5, 0.75, 1.0, 1.25])
    assert x.energy() == 6.0
    assert x.mean_power() == 1.5
    assert not x.is_real
    assert x.shift(1).samples[1] == 1


def test_signal_is_immutable():
    x = Signal(np.ones(4))
    with pytest.raises(ValueError):
        x.samples[0] = 2


def test_incompatible_signals():
    with pytest.raises(ShapeError):
        Signal(np.ones(4)) + Signal(np.ones(6))
    with pytest.raises(ShapeError):
        Signal(np.ones(4), 1.0) + Signal(np.ones(4), 2.0)


def test_derive_seed_is_deterministic_and_distinct():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    seeds = {derive_seed(7, i) for i in range(100)}
    assert len(seeds) == 100
    assert derive_seed(7, 1) != derive_seed(8, 1)


# -- SpectralDensity -----------------------------------------------------------

def test_psd_validation():
    with pytest.raises(ConstructionError):
        SpectralDensity([0, 1, 3], [1, 1, 1])
    with pytest.raises(ConstructionError):
        SpectralDensity([0, 1, 2], [1, 1, 1])
    with pytest.raises(ConstructionError):
        SpectralDensity([-1, 0, 1], [1, -1e-6, 1])


def test_psd_clamps_rounding_negatives():
    s = SpectralDensity([-1, 0, 1], [1, -1e-13, 1])
    assert s.values[1] == 0.0


def test_psd_shapes_total_power():
    assert SpectralDensity.lowpass(256, 1.0, 0.25).total_power() == pytest.approx(129 / 256)
    assert SpectralDensity.triangle(256, 1.0, 0.125).total_power() == pytest.approx(0.125)


# -- SourceModel ---------------------------------------------------------------

def test_gaussian_model_normalised_to_unit_power():
    m = SourceModel.gaussian(SpectralDensity.lowpass(256, 1.0, 0.1, 7.0))
    assert m.psd.total_power() == pytest.approx(1.0, abs=1e-12)


def test_zero_psd_model_is_silent():
    m = SourceModel.gaussian(SpectralDensity.on_dft_grid(16, 1.0, 0.0))
    assert m.is_silent
    assert np.all(realize(m, 16, 1.0, 3).samples == 0)


def test_alphabet_normalised():
    m = SourceModel.discrete([2.0, -2.0, 4.0], [0.25, 0.25, 0.5])
    second = np.sum(m.probs * np.abs(m.atoms) ** 2)
    assert second == pytest.approx(1.0, abs=1e-12)
    assert m.real


@pytest.mark.parametrize("atoms,probs", [([1, -1], [0.6, 0.6]), ([1, -1], [1.5, -0.5]), ([1, -1], [1.0])])
def test_alphabet_probability_errors(atoms, probs):
    with pytest.raises(ConstructionError):
        SourceModel.discrete(atoms, probs)


def test_empty_alphabet():
    with pytest.raises(ConstructionError):
        SourceModel.discrete([])


def test_unknown_kind():
    with pytest.raises(ConstructionError):
        SourceModel("laplace")


# -- generators ----------------------------------------------------------------

def test_gaussian_zero_psd_gives_zero():
    x = gen_gaussian_process(SpectralDensity.on_dft_grid(256, 1.0, 0.0), 256, 1.0, 0)
    assert np.all(x.samples == 0)


def test_gaussian_odd_length():
    with pytest.raises(ConstructionError):
        gen_gaussian_process(SpectralDensity.on_dft_grid(8, 1.0, 1.0), 255, 1.0, 0)


def test_gaussian_white_variance():
    white = SpectralDensity.on_dft_grid(4096, 1.0, 1.0)
    v = np.mean([np.mean(np.abs(gen_gaussian_process(white, 4096, 1.0, derive_seed(1, r)).samples) ** 2)
                 for r in range(200)])
    assert 0.95 <= v <= 1.05


def test_gaussian_real_flag():
    white = SpectralDensity.on_dft_grid(512, 1.0, 1.0)
    x = gen_gaussian_process(white, 512, 1.0, 4, real=True)
    assert x.is_real


def _averaged_periodogram(target, n, count, real):
    acc = np.zeros(n)
    for r in range(count):
        acc += psd(gen_gaussian_process(target, n, 1.0, derive_seed(2, r), real=real)).values
    return acc / count


def test_lowpass_periodogram_converges_per_bin():
    # each averaged bin has relative std 1/sqrt(R); bound every bin at 5 sigma
    n, count = 4096, 500
    target = SpectralDensity.lowpass(n, 1.0, 0.25)
    avg = _averaged_periodogram(target, n, count, real=False)
    assert np.all(np.abs(avg - target.values) <= 5 * target.values / np.sqrt(count) + 1e-12)


@pytest.mark.xfail(strict=True, reason="max over 4096 bins of an R=500 average deviates ~0.15; see notes")
def test_lowpass_periodogram_max_error_literal():
    n = 4096
    target = SpectralDensity.lowpass(n, 1.0, 0.25)
    avg = _averaged_periodogram(target, n, 500, real=False)
    assert np.max(np.abs(avg - target.values)) <= 0.1


def test_gaussian_is_deterministic():
    white = SpectralDensity.on_dft_grid(64, 1.0, 1.0)
    a = gen_gaussian_process(white, 64, 1.0, 9).samples
    b = gen_gaussian_process(white, 64, 1.0, 9).samples
    assert a.tobytes() == b.tobytes()


def test_chirp_degenerate_is_tone():
    n = 128
    x = gen_chirp(0.125, 0.125, n, 1.0)
    np.testing.assert_allclose(x.samples, np.exp(2j * np.pi * 0.125 * np.arange(n)), atol=1e-12)


def test_chirp_unit_modulus_and_sweep():
    x = gen_chirp(0.1, 0.4, 1024, 1.0)
    np.testing.assert_allclose(np.abs(x.samples), 1.0, atol=1e-12)
    inst = np.diff(np.unwrap(np.angle(x.samples))) / (2 * np.pi)
    expected = 0.1 + 0.3 * (np.arange(1023) + 0.5) / 1024
    np.testing.assert_allclose(inst, expected, atol=1e-9)


@pytest.mark.parametrize("f0,f1", [(0.5, 0.1), (0.1, -0.6)])
def test_chirp_beyond_nyquist(f0, f1):
    with pytest.raises(ConstructionError):
        gen_chirp(f0, f1, 64, 1.0)


def test_discrete_support_and_mean():
    x = gen_discrete(SourceModel.bpsk(seed=3), 100_000, 1.0)
    assert set(np.unique(x.samples.real)) == {-1.0, 1.0}
    assert abs(np.mean(x.samples.real)) <= 0.02


def test_discrete_single_atom_is_constant():
    x = gen_discrete(SourceModel.discrete([1.0]), 16, 1.0)
    assert np.all(x.samples == 1.0)


def test_discrete_wrong_model():
    with pytest.raises(UsageError):
        gen_discrete(SourceModel.gaussian(), 16, 1.0)


# -- analytic signal -----------------------------------------------------------

def test_analytic_of_cosine():
    n, k = 256, 17
    t = np.arange(n)
    a = analytic_signal(Signal(np.cos(2 * np.pi * k * t / n)))
    assert np.max(np.abs(a.samples - np.exp(2j * np.pi * k * t / n))[n // 4:3 * n // 4]) <= 1e-9


def test_analytic_constant_passthrough():
    a = analytic_signal(Signal(np.full(8, 2.5)))
    np.testing.assert_allclose(a.samples, 2.5, atol=1e-15)


def test_analytic_of_analytic_is_identity():
    a = analytic_signal(random_signal(64, 1, complex_=False))
    assert analytic_signal(a) is a


@given(st.integers(1, 64), st.integers(0, 2 ** 32 - 1))
def test_analytic_real_part_and_energy(h, seed):
    n = 2 * h
    x = random_signal(n, seed, complex_=False)
    a = analytic_signal(x)
    scale = np.max(np.abs(x.samples))
    assert np.max(np.abs(a.samples.real - x.samples.real)) <= 1e-12 * scale
    X = np.fft.fft(x.samples)
    expected = 2 * x.energy() - abs(X[0]) ** 2 / n - abs(X[n // 2]) ** 2 / n
    assert a.energy() == pytest.approx(expected, rel=1e-9)
    A = np.fft.fft(a.samples)
    assert np.max(np.abs(A[n // 2 + 1:]), initial=0.0) <= 1e-12 * max(np.max(np.abs(X)), 1.0)


@given(st.integers(1, 32), st.integers(0, 2 ** 32 - 1))
def test_analytic_idempotent_on_complex(h, seed):
    x = random_signal(2 * h, seed)
    a = analytic_signal(x)
    np.testing.assert_allclose(analytic_signal(a).samples, a.samples, atol=1e-12)


# -- channel -------------------------------------------------------------------

def test_mix_snr_zero_is_noise():
    x = Signal(np.ones(1000))
    y = mix(x, x, 0.0, "real", 5)
    rng = np.random.default_rng(5)
    np.testing.assert_array_equal(y.samples, rng.standard_normal(1000))


def test_mix_scaling_law():
    x1 = random_signal(64, 1)
    zero = x1 * 0
    y = mix(x1, zero, 4.0, "complex_circular", 3)
    n = mix(zero, zero, 0.0, "complex_circular", 3)
    np.testing.assert_allclose(y.samples, 2 * x1.samples + n.samples, atol=1e-14)


def test_mix_variance():
    white = SourceModel.gaussian(real=True)
    x1, x2 = draw_pair(white, white, 0.0, 10_000, 1.0, 11)
    y = mix(x1, x2, 1.0, "real", 12)
    assert 2.8 <= np.var(y.samples.real) <= 3.2


def test_mix_complex_noise_unit_variance():
    z = Signal(np.zeros(20_000, dtype=complex))
    n = mix(z, z, 0.0, "complex_circular", 1).samples
    assert np.mean(np.abs(n) ** 2) == pytest.approx(1.0, abs=0.05)
    assert np.var(n.real) == pytest.approx(0.5, abs=0.03)


def test_mix_errors():
    with pytest.raises(ShapeError):
        mix(Signal(np.ones(4)), Signal(np.ones(6)), 1.0)
    with pytest.raises(ConstructionError):
        mix(Signal(np.ones(4)), Signal(np.ones(4)), -1.0)


def test_draw_pair_gaussian_correlation():
    g = SourceModel.gaussian(real=True)
    x1, x2 = draw_pair(g, g, 0.6, 50_000, 1.0, 1)
    r = np.corrcoef(x1.samples.real, x2.samples.real)[0, 1]
    assert r == pytest.approx(0.6, abs=0.02)


def test_draw_pair_alphabet_copy_mixing():
    b = SourceModel.bpsk()
    x1, x2 = draw_pair(b, b, -0.5, 50_000, 1.0, 2)
    r = np.mean(x1.samples.real * x2.samples.real)
    assert r == pytest.approx(-0.5, abs=0.02)
    assert set(np.unique(x2.samples.real)) == {-1.0, 1.0}


def test_draw_pair_undefined_correlation():
    with pytest.raises(UsageError):
        draw_pair(SourceModel.chirp(0.1, 0.2), SourceModel.gaussian(), 0.5, 16, 1.0, 0)


def test_mixture_channel_realize():
    g = SourceModel.gaussian(real=True)
    ch = MixtureChannel(g, g, 0.0, 2.0, "real")
    x1, x2, y = ch.realize(64, 1.0, 3)
    x1b, x2b, yb = ch.realize(64, 1.0, 3)
    assert y.samples.tobytes() == yb.samples.tobytes()
    assert np.var(y.samples - np.sqrt(2.0) * (x1.samples + x2.samples)) > 0


def test_dft_freqs_layout():
    np.testing.assert_allclose(dft_freqs(4, 8.0), [-4, -2, 0, 2])
