"""Discrete-time rational systems used as ground truth.

A system is ``G(q) = B(q)/A(q)`` with ``B(q) = sum_i b_i q^-i`` and
``A(q) = sum_i a_i q^-i``. Its frequency response at bin ``k`` is obtained by
substituting ``Omega_k = exp(-j w_k T)`` for the lag ``q^-1``, which matches the
sign convention of :func:`mrfrf.signals.dft`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import tomli
from scipy import signal as sps

from .exceptions import InvalidInputError, PoleOnGridError
from .signals import FrequencyGrid, Spectrum, TimeSignal


@dataclass
class RationalSystem:
    b: np.ndarray
    a: np.ndarray
    sampling_time: float = 1.0

    def __post_init__(self):
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if self.a[0] == 0:
            raise InvalidInputError("leading denominator coefficient a_0 must be nonzero")

    def poles(self) -> np.ndarray:
        # roots in z of z^na A(z^-1)
        a = np.trim_zeros(self.a, "b")
        return np.roots(a) if a.size > 1 else np.array([], dtype=complex)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1))

    def to_text(self) -> str:
        fmt = lambda c: "[" + ", ".join(repr(float(x)) for x in c) + "]"  # noqa: E731
        return (
            f"b = {fmt(self.b)}\n"
            f"a = {fmt(self.a)}\n"
            f"sampling_time = {float(self.sampling_time)!r}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "RationalSystem":
        try:
            d = tomli.loads(text)
            return cls(d["b"], d["a"], d.get("sampling_time", 1.0))
        except (tomli.TOMLDecodeError, KeyError) as exc:
            raise InvalidInputError(f"cannot parse rational system: {exc}") from exc


@dataclass
class NoiseSpec:
    variance: float
    seed: int = 0
    shaping: RationalSystem | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidInputError(f"noise variance must be >= 0, got {self.variance}")


def simulate(sys: RationalSystem, u: TimeSignal, initial_conditions=None) -> TimeSignal:
    """Run the difference equation ``A(q) y = B(q) u``.

    ``initial_conditions`` is the state of the transposed direct-form II
    realisation (as used by :func:`scipy.signal.lfilter`), of length
    ``max(len(a), len(b)) - 1``. Zero state when omitted.
    """
    n_state = max(sys.a.size, sys.b.size) - 1
    if initial_conditions is None or n_state == 0:
        y = sps.lfilter(sys.b, sys.a, u.samples)
    else:
        zi = np.asarray(initial_conditions, dtype=float)
        if zi.size != n_state:
            raise InvalidInputError(f"expected {n_state} initial state values, got {zi.size}")
        y, _ = sps.lfilter(sys.b, sys.a, u.samples, zi=zi)
    if not np.all(np.isfinite(y)):
        raise OverflowError("simulation diverged beyond floating-point range")
    return TimeSignal(y, u.sampling_time, u.rate_tag)


def eval_polynomial(coef: np.ndarray, omega_var: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_i coef[i] * omega_var**i``."""
    return np.polynomial.polynomial.polyval(omega_var, coef)


def freqresp(sys: RationalSystem, grid: FrequencyGrid, sampling_time: float | None = None) -> Spectrum:
    """``G(Omega_k) = B(Omega_k)/A(Omega_k)`` with ``Omega_k = exp(-j w_k T)``."""
    T = sys.sampling_time if sampling_time is None else sampling_time
    Om = np.exp(-1j * grid.omega * T)
    den = eval_polynomial(sys.a, Om)
    bad = np.abs(den) < 1e-14
    if np.any(bad):
        raise PoleOnGridError(f"pole on the frequency grid at bins {grid.bins[bad].tolist()}")
    G = eval_polynomial(sys.b, Om) / den
    return Spectrum(G, T, n_points=G.size)


def noise_variance_for_snr(signal: TimeSignal, snr_db: float) -> float:
    """White-noise variance giving ``var(signal) / var(noise) = 10**(snr_db/10)``."""
    return float(np.var(signal.samples) / 10 ** (snr_db / 10))


def measured_snr_db(clean: TimeSignal, noisy: TimeSignal) -> float:
    v = noisy.samples - clean.samples
    return float(10 * np.log10(np.var(clean.samples) / np.var(v)))


def add_noise(sig: TimeSignal, noise: NoiseSpec) -> TimeSignal:
    """Add ``H(q) e`` with ``e`` i.i.d. zero-mean Gaussian of the given variance."""
    if noise.variance == 0:
        return TimeSignal(sig.samples.copy(), sig.sampling_time, sig.rate_tag)
    rng = np.random.default_rng(noise.seed)
    e = rng.normal(0.0, np.sqrt(noise.variance), size=len(sig))
    if noise.shaping is not None:
        e = sps.lfilter(noise.shaping.b, noise.shaping.a, e)
    return TimeSignal(sig.samples + e, sig.sampling_time, sig.rate_tag)


def _mode(fn: float, zeta: float, gain: float, T: float):
    wn = 2 * np.pi * fn
    rho = np.exp(-zeta * wn * T)
    theta = wn * np.sqrt(1 - zeta**2) * T
    a = np.array([1.0, -2 * rho * np.cos(theta), rho**2])
    # zero at z = -1 plus one delay, DC gain matched to `gain`
    b = gain * a.sum() / 2 * np.array([0.0, 1.0, 1.0])
    return b, a


def make_resonant_plant(modes, sampling_time: float, static_gain: float = 0.0) -> RationalSystem:
    """Parallel connection of lightly damped second-order modes.

    Each mode ``(f_n [Hz], zeta, dc_gain)`` is discretised by mapping its
    continuous-time poles through ``z = exp(s T)``. ``static_gain`` adds a
    direct feedthrough term; with no modes the plant is that static gain.
    """
    nyq = 1 / (2 * sampling_time)
    b_tot, a_tot = np.array([float(static_gain)]), np.array([1.0])
    for fn, zeta, gain in modes:
        if not 0 < fn < nyq:
            raise InvalidInputError(f"mode frequency {fn} Hz must lie in (0, {nyq}) Hz")
        if not 0 < zeta < 1:
            raise InvalidInputError(f"damping ratio {zeta} must lie in (0, 1)")
        b, a = _mode(fn, zeta, gain, sampling_time)
        b_tot = _padd(np.convolve(b_tot, a), np.convolve(b, a_tot))
        a_tot = np.convolve(a_tot, a)
    if not modes and static_gain == 0:
        b_tot = np.array([0.0])
    return RationalSystem(b_tot, a_tot, sampling_time)


def _padd(p, q):
    out = np.zeros(max(p.size, q.size))
    out[: p.size] += p
    out[: q.size] += q
    return out
