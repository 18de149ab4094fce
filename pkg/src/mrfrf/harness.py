"""Baseline spectral-analysis estimator and FRF error metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import windows

from .estimator import OK, FrfEstimate
from .exceptions import InvalidInputError
from .signals import FAST, Spectrum, TimeSignal

UNDEFINED = "undefined"


@dataclass(frozen=True)
class SaConfig:
    segment_length: int = 200
    overlap: int = 100
    window: str = "hann"

    def __post_init__(self):
        if not 0 <= self.overlap < self.segment_length:
            raise InvalidInputError("overlap must satisfy 0 <= overlap < segment_length")
        if self.window != "hann":
            raise InvalidInputError(f"only the Hanning window is supported, got {self.window!r}")

    def n_segments(self, n: int) -> int:
        if self.segment_length > n:
            return 0
        return (n - self.segment_length) // (self.segment_length - self.overlap) + 1


class CumulativeError(NamedTuple):
    value: float
    skipped: int


def zero_interpolate(y_l: TimeSignal, F: int) -> TimeSignal:
    """Insert ``F - 1`` zeros after every slow-rate sample."""
    if int(F) != F or F < 1:
        raise InvalidInputError(f"F must be a positive integer, got {F}")
    out = np.zeros(len(y_l) * int(F))
    out[:: int(F)] = y_l.samples
    return TimeSignal(out, y_l.sampling_time / F, FAST)


def spectral_analysis(u_h: TimeSignal, y_l: TimeSignal, F: int, cfg: SaConfig = SaConfig()) -> FrfEstimate:
    """Hanning-windowed, segment-averaged cross/auto spectrum ratio.

    The output is zero-interpolated to the fast rate and multiplied by ``F``,
    so a system with the same gain in every band is recovered without bias.
    Estimates live on the segment grid, i.e. fast bins ``0, N/L, 2N/L, ...``.
    """
    N = len(u_h)
    if len(y_l) * F != N:
        raise InvalidInputError(f"output length {len(y_l)} times F={F} differs from input length {N}")
    L = cfg.segment_length
    n_seg = cfg.n_segments(N)
    if n_seg < 1:
        raise InvalidInputError(f"segment length {L} exceeds the record length {N}")
    if N % L:
        raise InvalidInputError(f"record length {N} must be a multiple of the segment length {L}")
    y_h = zero_interpolate(y_l, F).samples
    w = windows.hann(L, sym=False)
    step = L - cfg.overlap
    starts = step * np.arange(n_seg)
    idx = starts[:, None] + np.arange(L)[None, :]
    Us = np.fft.fft(u_h.samples[idx] * w, axis=1)
    Ys = np.fft.fft(y_h[idx] * w, axis=1)
    num = np.sum(Ys * np.conj(Us), axis=0)
    den = np.sum(np.abs(Us) ** 2, axis=0)
    undefined = den <= 1e-14 * max(den.max(), 1e-300)
    g = np.where(undefined, np.nan, F * num / np.where(undefined, 1.0, den))
    status = np.where(undefined, UNDEFINED, OK).astype(object)
    bins = np.arange(L) * (N // L)
    return FrfEstimate(g, np.full(L, np.nan), status, N, u_h.sampling_time, "SA", bins, F=F)


def to_fine_grid(est: FrfEstimate) -> FrfEstimate:
    """Linearly interpolate a coarse-grid estimate onto every fast bin."""
    ok = est.status == OK
    b = est.bins[ok].astype(float)
    g = est.g_hat[ok]
    N = est.n_points
    k = np.arange(N)
    # periodic continuation closes the gap between the last coarse bin and N
    bp = np.concatenate([b, b[:1] + N])
    gp = np.concatenate([g, g[:1]])
    gi = np.interp(k, bp, gp.real) + 1j * np.interp(k, bp, gp.imag)
    status = np.full(N, OK, dtype=object)
    return FrfEstimate(gi, np.full(N, np.nan), status, N, est.sampling_time, est.method, F=est.F)


def _true_values(G_true) -> np.ndarray:
    return G_true.coefficients if isinstance(G_true, Spectrum) else np.asarray(G_true, dtype=complex)


def cumulative_frf_error_curve(G_true, G_hat: FrfEstimate):
    """Running ``(1/N) sum_{k=1..n} |G - G_hat|`` for ``n = 0 .. N-1``.

    Returns the curve and the number of bins in ``1..N-1`` skipped because
    the estimate is missing or invalid there.
    """
    G = _true_values(G_true)
    N = G_hat.n_points
    if G.size != N:
        raise InvalidInputError(f"true FRF has {G.size} bins, estimate has {N}")
    g = G_hat.on_full_grid()
    err = np.abs(G - g)
    err[0] = 0.0
    invalid = ~np.isfinite(err)
    err[invalid] = 0.0
    skipped = np.cumsum(invalid)
    return np.cumsum(err) / N, skipped


def cumulative_frf_error(G_true, G_hat: FrfEstimate, n: int) -> CumulativeError:
    curve, skipped = cumulative_frf_error_curve(G_true, G_hat)
    return CumulativeError(float(curve[n]), int(skipped[n]))
