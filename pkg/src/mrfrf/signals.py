"""DFT machinery, frequency grids, multisine excitation and downsampling.

Spectra follow the convention ``X(k) = sum_n x(n) exp(-j w_k n T)`` with
``w_k = 2 pi k / (N T)``, i.e. the plain (unnormalised) forward FFT.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError

FAST = "fast"
SLOW = "slow"


@dataclass
class TimeSignal:
    """Uniformly sampled real signal."""

    samples: np.ndarray
    sampling_time: float
    rate_tag: str = FAST

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).ravel()
        if self.samples.size < 1:
            raise InvalidInputError("a time signal needs at least one sample")
        if not self.sampling_time > 0:
            raise InvalidInputError(f"sampling_time must be > 0, got {self.sampling_time}")
        if self.rate_tag not in (FAST, SLOW):
            raise InvalidInputError(f"unknown rate tag {self.rate_tag!r}")

    def __len__(self):
        return self.samples.size

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


@dataclass
class Spectrum:
    """DFT coefficients on the grid ``w_k = 2 pi k / (n_points sampling_time)``."""

    coefficients: np.ndarray
    sampling_time: float
    n_points: int = field(default=-1)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=complex).ravel()
        if self.n_points < 0:
            self.n_points = self.coefficients.size
        if self.coefficients.size != self.n_points or self.n_points < 1:
            raise InvalidInputError(
                f"spectrum has {self.coefficients.size} coefficients, expected {self.n_points}"
            )
        if not self.sampling_time > 0:
            raise InvalidInputError(f"sampling_time must be > 0, got {self.sampling_time}")

    def __len__(self):
        return self.n_points

    def __getitem__(self, k):
        # DFT periodicity: any integer bin is valid
        return self.coefficients[np.mod(k, self.n_points)]

    def freq_hz(self) -> np.ndarray:
        return np.arange(self.n_points) / (self.n_points * self.sampling_time)


@dataclass(frozen=True)
class FrequencyGrid:
    omega: np.ndarray
    bins: np.ndarray

    @property
    def freq_hz(self) -> np.ndarray:
        return self.omega / (2 * np.pi)


@dataclass
class MultisineSpec:
    """Random-phase multisine with a flat amplitude spectrum.

    ``excited_bins=None`` excites bins ``1 .. ceil(n_points/2) - 1``, i.e. all
    bins except DC and the exact Nyquist bin.
    """

    n_points: int
    rms: float = 1.0
    excited_bins: tuple | None = None
    seed: int = 0

    def bins(self) -> np.ndarray:
        if self.excited_bins is None:
            return np.arange(1, (self.n_points + 1) // 2)
        return np.unique(np.asarray(self.excited_bins, dtype=int))


def dft(signal: TimeSignal) -> Spectrum:
    """Forward DFT of a time signal."""
    return Spectrum(np.fft.fft(signal.samples), signal.sampling_time)


def idft(spectrum: Spectrum, rate_tag: str = FAST) -> TimeSignal:
    """Inverse DFT; the imaginary part (round-off for real signals) is dropped."""
    x = np.fft.ifft(spectrum.coefficients)
    return TimeSignal(x.real, spectrum.sampling_time, rate_tag)


def frequency_grid(n_points: int, sampling_time: float) -> FrequencyGrid:
    if int(n_points) != n_points or n_points < 1:
        raise InvalidInputError(f"n_points must be a positive integer, got {n_points}")
    if not sampling_time > 0:
        raise InvalidInputError(f"sampling_time must be > 0, got {sampling_time}")
    k = np.arange(int(n_points))
    return FrequencyGrid(2 * np.pi * k / (n_points * sampling_time), k)


def generate_multisine(spec: MultisineSpec, sampling_time: float = 1.0) -> TimeSignal:
    """Synthesise one period of a random-phase multisine.

    Every excited bin gets the same DFT magnitude; phases are uniform on
    [0, 2 pi) and drawn from ``spec.seed``. The result is scaled to ``spec.rms``.
    """
    n = spec.n_points
    bins = spec.bins()
    if bins.size == 0:
        raise InvalidInputError("at least one bin must be excited")
    if bins.min() < 1 or bins.max() > n // 2:
        raise InvalidInputError(f"excited bins must lie in [1, {n // 2}]")
    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=bins.size)
    X = np.zeros(n, dtype=complex)
    X[bins] = np.exp(1j * phases)
    nyq = bins == n / 2
    if np.any(nyq):
        # the Nyquist bin of a real signal is real: keep the magnitude, pick a sign
        X[n // 2] = np.sign(np.cos(phases[nyq][0])) or 1.0
    lower = bins[~nyq]
    X[n - lower] = np.conj(X[lower])
    x = np.fft.ifft(X).real
    x *= spec.rms / np.sqrt(np.mean(x**2))
    return TimeSignal(x, sampling_time, FAST)


def downsample(fast: TimeSignal, factor: int) -> TimeSignal:
    """Keep every ``factor``-th sample: ``slow[m] = fast[m * factor]``."""
    if int(factor) != factor or factor < 1:
        raise InvalidInputError(f"downsampling factor must be a positive integer, got {factor}")
    factor = int(factor)
    if len(fast) % factor:
        raise InvalidInputError(
            f"signal length {len(fast)} is not divisible by {factor}; trim it first"
        )
    tag = FAST if factor == 1 else SLOW
    return TimeSignal(fast.samples[::factor], fast.sampling_time * factor, tag)


def window_bins(k: int, n_w: int, M: int) -> np.ndarray:
    """Slow-grid bins of the local window centred on ``k``.

    Near the borders the window is shifted so it stays inside ``[0, M]``.
    """
    if k <= n_w:
        lo = 0
    elif k > M - n_w:
        lo = M - 2 * n_w
    else:
        lo = k - n_w
    return np.arange(lo, lo + 2 * n_w + 1)


def check_roughness(U: Spectrum, k: int, n_w: int, F: int, M: int, tol: float = 1e-12) -> bool:
    """True if all input values differ pairwise inside the window and each aliased image."""
    if U.n_points != F * M:
        raise InvalidInputError(f"input spectrum has {U.n_points} bins, expected F*M = {F * M}")
    bins = window_bins(k, n_w, M)
    vals = U[bins[:, None] + M * np.arange(F)[None, :]]  # (window, band)
    diff = np.abs(vals[:, None, :] - vals[None, :, :])
    off = ~np.eye(bins.size, dtype=bool)
    return bool(np.all(diff[off] > tol))


# --- CSV exchange -----------------------------------------------------------

def write_signal_csv(path, signal: TimeSignal) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "value"])
        for i, v in enumerate(signal.samples):
            w.writerow([i, repr(float(v))])


def read_signal_csv(path, sampling_time: float, rate_tag: str = FAST) -> TimeSignal:
    path = Path(path)
    values = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"index", "value"} <= set(reader.fieldnames):
            raise InvalidInputError(f"{path}: expected header 'index,value'")
        for line, row in enumerate(reader, start=2):
            try:
                values.append(float(row["value"]))
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{line}: bad value {row['value']!r}") from exc
    return TimeSignal(np.array(values), sampling_time, rate_tag)


def write_spectrum_csv(path, spectrum: Spectrum) -> None:
    f = spectrum.freq_hz()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "freq_hz", "re", "im"])
        for k, c in enumerate(spectrum.coefficients):
            w.writerow([k, repr(float(f[k])), repr(float(c.real)), repr(float(c.imag))])
