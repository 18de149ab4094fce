import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mrfrf.exceptions import InvalidInputError
from mrfrf.signals import (
    SLOW,
    MultisineSpec,
    Spectrum,
    TimeSignal,
    check_roughness,
    dft,
    downsample,
    frequency_grid,
    generate_multisine,
    idft,
    read_signal_csv,
    window_bins,
    write_signal_csv,
)
from oracles import direct_dft, direct_idft

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def sig(x, T=1.0):
    return TimeSignal(np.asarray(x, float), T)


# --- dft / idft --------------------------------------------------------------

def test_dft_constant_and_impulse():
    np.testing.assert_allclose(dft(sig([1, 1, 1, 1])).coefficients, [4, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dft(sig([1, 0, 0, 0])).coefficients, [1, 1, 1, 1], atol=1e-12)


def test_dft_cosine_matches_direct_summation():
    N, m = 16, 3
    x = np.cos(2 * np.pi * m / N * np.arange(N))
    X = dft(sig(x)).coefficients
    np.testing.assert_allclose(X, direct_dft(x), atol=1e-12)
    assert abs(X[3] - 8) < 1e-9 and abs(X[13] - 8) < 1e-9
    others = np.delete(X, [3, 13])
    assert np.max(np.abs(others)) < 1e-9


def test_dft_rejects_empty_signal():
    with pytest.raises(InvalidInputError):
        dft(sig([]))


def test_idft_examples():
    np.testing.assert_allclose(idft(Spectrum([4, 0, 0, 0], 1.0)).samples, [1, 1, 1, 1], atol=1e-12)
    X = np.zeros(8, complex)
    X[1] = X[7] = 4
    x = idft(Spectrum(X, 1.0)).samples
    np.testing.assert_allclose(x, np.cos(2 * np.pi * np.arange(8) / 8), atol=1e-12)
    np.testing.assert_allclose(x, direct_idft(X).real, atol=1e-12)


def test_round_trip_random_n64(rng):
    x = rng.standard_normal(64)
    assert np.max(np.abs(idft(dft(sig(x))).samples - x)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 4096), elements=finite))
def test_round_trip_property(x):
    back = idft(dft(sig(x))).samples
    assert np.max(np.abs(back - x)) <= 1e-10 * max(np.max(np.abs(x)), 1e-300) + 1e-300


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 512), elements=finite))
def test_parseval(x):
    X = dft(sig(x)).coefficients
    lhs, rhs = np.sum(x**2), np.sum(np.abs(X) ** 2) / x.size
    assert abs(lhs - rhs) <= 1e-9 * max(lhs, 1e-300)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 300), elements=finite))
def test_conjugate_symmetry_of_real_spectra(x):
    X = dft(sig(x)).coefficients
    N = X.size
    mirror = np.conj(X[(-np.arange(N)) % N])
    assert np.allclose(X, mirror, rtol=0, atol=1e-9 * max(np.max(np.abs(X)), 1.0))


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([1, 2, 3, 5]), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_aliasing_identity_property(F, M, seed):
    x = np.random.default_rng(seed).standard_normal(F * M)
    Xh = dft(sig(x)).coefficients
    Xl = dft(downsample(sig(x), F)).coefficients
    k = np.arange(M)
    folded = sum(Xh[k + f * M] for f in range(F)) / F
    assert np.allclose(Xl, folded, rtol=0, atol=1e-9 * max(np.max(np.abs(Xl)), 1.0))


def test_spectrum_wraps_bins():
    S = Spectrum(np.arange(4), 1.0)
    assert S[5] == 1 and S[-1] == 3


# --- frequency grid ----------------------------------------------------------

def test_frequency_grid_fast_and_slow_spacing():
    fast = frequency_grid(1200, 0.5e-3)
    slow = frequency_grid(400, 1.5e-3)
    assert fast.omega[1] == pytest.approx(2 * np.pi * 5 / 3)
    assert fast.freq_hz[1] == pytest.approx(5 / 3)
    assert 2 * np.pi * 1200 / (1200 * 0.5e-3) / (2 * np.pi) == pytest.approx(2000.0)
    np.testing.assert_allclose(slow.omega, fast.omega[:400], rtol=1e-14)


def test_frequency_grid_trivial_and_errors():
    np.testing.assert_allclose(frequency_grid(2, 1.0).omega, [0, np.pi])
    with pytest.raises(InvalidInputError):
        frequency_grid(0, 1.0)
    with pytest.raises(InvalidInputError):
        frequency_grid(4, 0.0)


# --- multisine ---------------------------------------------------------------

def test_multisine_benchmark_is_flat_with_requested_rms():
    u = generate_multisine(MultisineSpec(1200, rms=1.44, excited_bins=tuple(range(1, 601)), seed=0), 0.5e-3)
    assert abs(u.rms - 1.44) / 1.44 < 1e-3
    mag = np.abs(dft(u).coefficients[1:601])
    assert np.ptp(mag) / mag.mean() < 1e-9


def test_multisine_default_bins_flat():
    u = generate_multisine(MultisineSpec(1200, rms=1.44, seed=3))
    mag = np.abs(dft(u).coefficients[1:600])
    assert np.ptp(mag) / mag.mean() < 1e-9
    assert abs(u.rms - 1.44) / 1.44 < 1e-3


def test_multisine_single_bin_is_sinusoid():
    N, m = 64, 5
    u = generate_multisine(MultisineSpec(N, rms=1.0, excited_bins=(m,), seed=1)).samples
    X = np.fft.fft(u)
    phase = np.angle(X[m])
    np.testing.assert_allclose(u, np.sqrt(2) * np.cos(2 * np.pi * m * np.arange(N) / N + phase), atol=1e-12)


def test_multisine_seeds():
    a = generate_multisine(MultisineSpec(256, seed=1))
    b = generate_multisine(MultisineSpec(256, seed=2))
    a2 = generate_multisine(MultisineSpec(256, seed=1))
    np.testing.assert_array_equal(a.samples, a2.samples)
    A, B = dft(a).coefficients, dft(b).coefficients
    np.testing.assert_allclose(np.abs(A), np.abs(B), rtol=1e-9, atol=1e-12)
    assert not np.allclose(np.angle(A[1:128]), np.angle(B[1:128]))


def test_multisine_rejects_bad_bins():
    with pytest.raises(InvalidInputError):
        generate_multisine(MultisineSpec(64, excited_bins=(0,)))
    with pytest.raises(InvalidInputError):
        generate_multisine(MultisineSpec(64, excited_bins=(33,)))
    with pytest.raises(InvalidInputError):
        generate_multisine(MultisineSpec(64, excited_bins=()))


# --- downsample --------------------------------------------------------------

def test_downsample_examples():
    s = downsample(sig(np.arange(6), 0.5), 3)
    np.testing.assert_array_equal(s.samples, [0, 3])
    assert s.sampling_time == 1.5 and s.rate_tag == SLOW
    x = sig(np.arange(5))
    np.testing.assert_array_equal(downsample(x, 1).samples, x.samples)
    with pytest.raises(InvalidInputError):
        downsample(sig(np.arange(7)), 3)


def test_downsample_aliased_sinusoid():
    N, M, F = 12, 4, 3
    x = np.cos(2 * np.pi * 5 * np.arange(N) / N)
    Yh = direct_dft(x)
    Yl = direct_dft(x[::F])
    assert abs(Yl[1] - sum(Yh[1 + M * f] for f in range(F)) / F) < 1e-12
    np.testing.assert_allclose(dft(downsample(sig(x), F)).coefficients, Yl, atol=1e-12)


# --- roughness ---------------------------------------------------------------

def pairwise_rough(U, k, n_w, F, M, tol):
    bins = window_bins(k, n_w, M)
    for i in range(F):
        for r1 in bins:
            for r2 in bins:
                if r1 != r2 and abs(U[r1 + i * M] - U[r2 + i * M]) <= tol:
                    return False
    return True


def test_roughness_flat_zero_phase_input_fails():
    U = Spectrum(np.ones(120), 1.0)
    assert not check_roughness(U, 10, 5, 3, 40)


def test_roughness_single_bin_input_fails():
    u = generate_multisine(MultisineSpec(120, excited_bins=(7,), seed=0))
    assert not check_roughness(dft(u), 7, 5, 3, 40)


def test_roughness_random_multisine_matches_exhaustive_oracle():
    F, M, n_w = 3, 40, 5
    U = dft(generate_multisine(MultisineSpec(F * M, seed=4)))
    for k in range(M):
        assert check_roughness(U, k, n_w, F, M, 1e-12) == pairwise_rough(U, k, n_w, F, M, 1e-12)
    # interior windows of a random-phase multisine are rough
    assert all(check_roughness(U, k, n_w, F, M, 1e-12) for k in range(n_w + 1, M - n_w))


def test_window_bins_borders():
    np.testing.assert_array_equal(window_bins(0, 18, 400), np.arange(0, 37))
    np.testing.assert_array_equal(window_bins(200, 18, 400), np.arange(182, 219))
    np.testing.assert_array_equal(window_bins(399, 18, 400), np.arange(364, 401))


# --- csv ---------------------------------------------------------------------

def test_signal_csv_round_trip(tmp_path, rng):
    x = sig(rng.standard_normal(17), 0.5e-3)
    write_signal_csv(tmp_path / "x.csv", x)
    back = read_signal_csv(tmp_path / "x.csv", 0.5e-3)
    np.testing.assert_array_equal(back.samples, x.samples)


def test_signal_csv_bad_value(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("index,value\n0,1.0\n1,abc\n")
    with pytest.raises(InvalidInputError, match=":3"):
        read_signal_csv(p, 1.0)
