"""Local rational modelling over aliased frequency bands.

For every slow-grid bin ``k`` the slow-rate output in a window ``k + r`` is
explained by ``F`` local rational models (one per fast-rate band ``k + f M``)
sharing a common denominator, plus a local transient term. Multiplying by the
common denominator makes the fit linear in the parameters, so each window is
a small complex least-squares problem ``Y_lw ~ theta @ K_w``.

Parameter layout (row vector, unscaled ``r`` basis)::

    [ G_0/F .. G_{F-1}/F | g_{s,f} (s = 1..R_g, f fastest) | T, t_1..t_Rt | e_1..e_Re ]

The transient block is the transient contribution to the *slow* output.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    DegreesOfFreedomError,
    InvalidConfigError,
    InvalidInputError,
    LocalPoleError,
    RankDeficientWindowError,
)
from .signals import Spectrum, check_roughness, window_bins

OK = "ok"
RANK_DEFICIENT = "rank-deficient"
NO_DOF = "no-dof"


@dataclass(frozen=True)
class EstimatorConfig:
    """Window half-width and local polynomial degrees.

    Defaults are the wafer-stage settings: F=3, n_w=18, R_g=R_t=4, R_e=7.
    """

    F: int = 3
    n_w: int = 18
    R_g: int = 4
    R_t: int = 4
    R_e: int = 7
    rcond_min: float = 1e-12

    def __post_init__(self):
        for name in ("F", "n_w", "R_g", "R_t", "R_e"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise InvalidConfigError(f"{name} must be a non-negative integer, got {v}")
        if self.F < 1:
            raise InvalidConfigError(f"F must be >= 1, got {self.F}")

    @classmethod
    def from_rational_degrees(cls, F, n_w, R_n, R_d, R_m, **kw) -> "EstimatorConfig":
        """Config equivalent to per-band degrees (numerator, denominator, transient)."""
        return cls(F, n_w, R_n + R_d * (F - 1), R_m + R_d * (F - 1), R_d * F, **kw)

    @property
    def n_params(self) -> int:
        return (self.R_g + 1) * self.F + self.R_t + 1 + self.R_e

    @property
    def window_length(self) -> int:
        return 2 * self.n_w + 1

    @property
    def dof(self) -> int:
        return self.window_length - self.n_params

    def exponents(self) -> np.ndarray:
        """Power of ``r`` attached to each parameter."""
        return np.concatenate([
            np.repeat(np.arange(self.R_g + 1), self.F),
            np.arange(self.R_t + 1),
            np.arange(1, self.R_e + 1),
        ])


@dataclass
class ParameterVector:
    values: np.ndarray
    F: int
    R_g: int
    R_t: int
    R_e: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).ravel()
        if self.values.size != (self.R_g + 1) * self.F + self.R_t + 1 + self.R_e:
            raise InvalidInputError(f"parameter vector has wrong length {self.values.size}")

    @classmethod
    def for_config(cls, values, cfg: EstimatorConfig) -> "ParameterVector":
        return cls(values, cfg.F, cfg.R_g, cfg.R_t, cfg.R_e)

    @property
    def config(self) -> EstimatorConfig:
        return EstimatorConfig(self.F, 0, self.R_g, self.R_t, self.R_e)

    @property
    def theta_G(self) -> np.ndarray:
        return self.values[: self.F]

    @property
    def numerator(self) -> np.ndarray:
        """All system-numerator coefficients, shape ``(R_g + 1, F)``."""
        return self.values[: (self.R_g + 1) * self.F].reshape(self.R_g + 1, self.F)

    @property
    def theta_g(self) -> np.ndarray:
        return self.numerator[1:]

    @property
    def transient_block(self) -> np.ndarray:
        i0 = (self.R_g + 1) * self.F
        return self.values[i0 : i0 + self.R_t + 1]

    @property
    def theta_e(self) -> np.ndarray:
        return self.values[self.values.size - self.R_e :]

    def rescaled(self, scale: float) -> "ParameterVector":
        """Coefficients for the basis ``(r/scale)**s``; ``rescaled(1/scale)`` undoes it."""
        return ParameterVector(
            self.values * float(scale) ** self.config.exponents(),
            self.F, self.R_g, self.R_t, self.R_e,
        )

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.F, self.R_g, self.R_t, self.R_e)


@dataclass
class WindowSolve:
    k: int
    K_w: np.ndarray
    Y_lw: np.ndarray
    theta: ParameterVector
    residual: np.ndarray
    q: int
    r: np.ndarray = field(repr=False, default=None)
    _factors: tuple = field(repr=False, default=None)

    def frf_variance(self, C_v: float) -> np.ndarray:
        """Band variances from the stored factorisation (equal to :func:`estimate_frf_variance`)."""
        if self._factors is None:
            return estimate_frf_variance(self.K_w, C_v, self.theta.F)
        # the scaled and unscaled regressors differ by a row scaling only,
        # which the equilibration absorbs; the FRF rows carry power 0
        return _band_variance(*self._factors, C_v, self.theta.F)


@dataclass
class FrfEstimate:
    """Fast-grid FRF estimate.

    ``bins`` are fast-grid indices; for local-model estimates all ``N`` bins
    are present, for spectral analysis only the coarse grid.
    """

    g_hat: np.ndarray
    variance: np.ndarray
    status: np.ndarray
    n_points: int
    sampling_time: float
    method: str = "LRM"
    bins: np.ndarray | None = None
    t_hat: np.ndarray | None = None
    noise_variance: np.ndarray | None = None
    F: int = 1

    def __post_init__(self):
        if self.bins is None:
            self.bins = np.arange(self.n_points)

    @property
    def freq_hz(self) -> np.ndarray:
        return self.bins / (self.n_points * self.sampling_time)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def on_full_grid(self) -> np.ndarray:
        """``g_hat`` on all ``n_points`` bins, NaN where not estimated or invalid."""
        out = np.full(self.n_points, np.nan + 1j * np.nan)
        ok = self.status == OK
        out[self.bins[ok]] = self.g_hat[ok]
        return out

    def symmetry_mismatch(self) -> np.ndarray:
        """``|G(k) - conj(G(N-k))|`` on the full grid; a diagnostic only."""
        g = self.on_full_grid()
        return np.abs(g - np.conj(g[(-np.arange(self.n_points)) % self.n_points]))


class Violation(NamedTuple):
    label: str
    message: str


def band_window(k: int, n_w: int, M: int) -> np.ndarray:
    """Slow-grid bins ``k + r`` used for the local model at ``k``."""
    return window_bins(k, n_w, M)


def _check_geometry(U: Spectrum, Y_l: Spectrum, cfg: EstimatorConfig) -> int:
    M = Y_l.n_points
    if U.n_points != cfg.F * M:
        raise InvalidInputError(
            f"input has {U.n_points} bins but F*M = {cfg.F}*{M} = {cfg.F * M}"
        )
    bad = [v for v in validate_config(cfg, M) if v.label in ("32a", "32b")]
    if bad:
        raise InvalidConfigError("; ".join(v.message for v in bad), [v.label for v in bad])
    return M


def build_regressor(U: Spectrum, Y_l: Spectrum, k: int, cfg: EstimatorConfig, scale: float = 1.0):
    """Stack the regressor ``K_w`` and outputs ``Y_lw`` of the window at ``k``.

    Column ``r`` is ``[K1(r,R_g) kron Ubar(k+r); K1(r,R_t); -K2(r,R_e) Y_l(k+r)]``
    with powers of ``r/scale``. Fast bins wrap modulo ``N``, slow bins modulo ``M``.
    """
    M = _check_geometry(U, Y_l, cfg)
    K_w, Y_lw, _ = _regressor(U, Y_l, k, cfg, M, scale)
    return K_w, Y_lw


def _regressor(U, Y_l, k, cfg, M, scale):
    bins = band_window(k, cfg.n_w, M)
    r = bins - k
    rho = r / scale
    F = cfg.F
    Ubar = U[bins[None, :] + M * np.arange(F)[:, None]]  # (F, W)
    Y_lw = Y_l[bins]
    P = rho[None, :] ** np.arange(max(cfg.R_g, cfg.R_t, cfg.R_e) + 1)[:, None]  # (R+1, W)
    blocks = [
        (P[: cfg.R_g + 1, None, :] * Ubar[None, :, :]).reshape(-1, bins.size),
        P[: cfg.R_t + 1],
        -P[1 : cfg.R_e + 1] * Y_lw[None, :],
    ]
    return np.vstack(blocks).astype(complex), Y_lw.astype(complex), r


def _equilibrated_qr(K_w):
    d = np.linalg.norm(K_w, axis=1)
    d[d == 0] = 1.0
    Kt = K_w / d[:, None]
    Q, R = sla.qr(Kt.T, mode="economic")
    return Q, R, d


def _rcond(R) -> float:
    s = np.linalg.svd(R, compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def solve_window(K_w, Y_lw, k: int = -1, rcond_min: float = 1e-12):
    """Least-squares ``theta = argmin ||Y_lw - theta @ K_w||``.

    Solved through a QR factorisation of the row-equilibrated ``K_w^T``.

    Returns
    -------
    theta : ndarray
        Complex parameter row.
    residual : ndarray
        ``Y_lw - theta @ K_w``.
    q : int
        Residual degrees of freedom.
    """
    theta, residual, q, _ = _solve(K_w, Y_lw, k, rcond_min)
    return theta, residual, q


def _solve(K_w, Y_lw, k, rcond_min):
    K_w = np.asarray(K_w, dtype=complex)
    Y_lw = np.asarray(Y_lw, dtype=complex)
    p, n = K_w.shape
    if p > n:
        raise RankDeficientWindowError(k, 0.0)
    Q, R, d = _equilibrated_qr(K_w)
    rc = _rcond(R)
    if not rc >= rcond_min:
        raise RankDeficientWindowError(k, rc)
    x = sla.solve_triangular(R, Q.conj().T @ Y_lw)
    theta = x / d
    residual = Y_lw - theta @ K_w
    return theta, residual, n - p, (R, d)


def extract_frf(theta: ParameterVector, F: int | None = None):
    """FRF at the ``F`` band bins and the slow-rate transient at the centre bin."""
    F = theta.F if F is None else F
    return F * theta.theta_G, theta.transient_block[0]


def estimate_noise_variance(residual, q: int) -> float:
    """Residual-based noise variance ``res @ res^H / q``."""
    if q < 1:
        raise DegreesOfFreedomError("no degrees of freedom left for the noise variance")
    residual = np.asarray(residual)
    return float(np.vdot(residual, residual).real / q)


def estimate_frf_variance(K_w, C_v: float, F: int, rcond_min: float = 1e-12) -> np.ndarray:
    """Variance of the ``F`` band estimates: ``F^2 ||S_f||^2 C_v``.

    ``S_f = K_w^H (K_w K_w^H)^-1 e_f`` with ``e_f`` selecting band ``f`` of the
    FRF block.
    """
    _, R, d = _equilibrated_qr(np.asarray(K_w, dtype=complex))
    rc = _rcond(R)
    if not rc >= rcond_min:
        raise RankDeficientWindowError(-1, rc)
    return _band_variance(R, d, C_v, F)


def _band_variance(R, d, C_v, F):
    # ||K^H (K K^H)^-1 e_f|| = ||R^-T e_f|| / d_f for K = diag(d) (QR)^T
    E = np.zeros((R.shape[0], F))
    E[np.arange(F), np.arange(F)] = 1.0
    Z = sla.solve_triangular(R, E, trans="T")
    s2 = np.sum(np.abs(Z) ** 2, axis=0) / d[:F] ** 2
    return F**2 * s2 * C_v


def fit_window(U: Spectrum, Y_l: Spectrum, k: int, cfg: EstimatorConfig, M: int | None = None) -> WindowSolve:
    """Build and solve the local model at slow bin ``k``."""
    M = Y_l.n_points if M is None else M
    scale = max(cfg.n_w, 1)
    K_s, Y_lw, r = _regressor(U, Y_l, k, cfg, M, scale)
    theta_s, residual, q, fac = _solve(K_s, Y_lw, k, cfg.rcond_min)
    theta = ParameterVector.for_config(theta_s, cfg).rescaled(1.0 / scale)
    K_w = K_s * (float(scale) ** cfg.exponents())[:, None]
    return WindowSolve(k, K_w, Y_lw, theta, residual, q, r, fac)


def eval_estimated_output(theta: ParameterVector, U: Spectrum, k: int, r) -> np.ndarray:
    """Output of the local rational model at ``k + r``.

    ``(sum_f (G_f/F + sum_s g_sf r^s) U(k+r+fM) + T + sum_s t_s r^s) / (1 + sum_s e_s r^s)``
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    F = theta.F
    M = U.n_points // F
    num_poly = theta.numerator  # (R_g+1, F)
    pw = lambda R: r[None, :] ** np.arange(R + 1)[:, None]  # noqa: E731
    Ubar = U[(k + r.astype(int))[None, :] + M * np.arange(F)[:, None]]  # (F, W)
    G_loc = num_poly.T @ pw(theta.R_g)  # (F, W)
    num = np.sum(G_loc * Ubar, axis=0) + theta.transient_block @ pw(theta.R_t)
    den = 1.0 + theta.theta_e @ pw(theta.R_e)[1:]
    if np.any(np.abs(den) < 1e-14):
        raise LocalPoleError(f"local denominator vanishes in the window at k={k}")
    return num / den


def validate_config(cfg: EstimatorConfig, M: int, U: Spectrum | None = None, tol: float = 1e-12) -> list:
    """List the violated uniqueness conditions (labels ``32a``, ``32b``, ``32c``)."""
    out = []
    L, p = cfg.window_length, cfg.n_params
    if L < p:
        out.append(Violation("32a", f"window of {L} points is smaller than the {p} parameters"))
    if L > M:
        out.append(Violation("32b", f"window of {L} points exceeds the {M} slow-rate bins"))
    if U is not None and L <= M:
        bad = [k for k in range(M) if not check_roughness(U, k, cfg.n_w, cfg.F, M, tol)]
        if bad:
            head = ", ".join(map(str, bad[:8])) + (" ..." if len(bad) > 8 else "")
            out.append(Violation("32c", f"input not rough at {len(bad)} of {M} windows (k = {head})"))
    return out


def identify_frf(
    U: Spectrum,
    Y_l: Spectrum,
    cfg: EstimatorConfig,
    method: str | None = None,
    threads: int = 1,
    keep_solves: bool = False,
):
    """Closed-form local-model FRF estimate on all fast bins.

    A rank-deficient window marks its ``F`` band bins invalid without
    stopping the sweep. With ``keep_solves`` the per-window solutions are
    returned as a second value (``None`` for failed windows).
    """
    M = _check_geometry(U, Y_l, cfg)
    N, F = U.n_points, cfg.F
    if method is None:
        method = "LPM" if cfg.R_e == 0 else "LRM"

    def one(k):
        try:
            return fit_window(U, Y_l, k, cfg, M)
        except RankDeficientWindowError as exc:
            return exc

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(M)))
    else:
        results = [one(k) for k in range(M)]

    g = np.full(N, np.nan + 1j * np.nan)
    var = np.full(N, np.nan)
    status = np.full(N, RANK_DEFICIENT, dtype=object)
    t_hat = np.full(M, np.nan + 1j * np.nan)
    c_v = np.full(M, np.nan)
    for k, res in enumerate(results):
        if isinstance(res, Exception):
            continue
        idx = k + M * np.arange(F)
        g[idx], t_hat[k] = extract_frf(res.theta)
        status[idx] = OK
        try:
            c_v[k] = estimate_noise_variance(res.residual, res.q)
        except DegreesOfFreedomError:
            status[idx] = NO_DOF
            continue
        var[idx] = res.frf_variance(c_v[k])
    est = FrfEstimate(g, var, status, N, U.sampling_time, method, None, t_hat, c_v, F)
    if keep_solves:
        return est, [None if isinstance(r, Exception) else r for r in results]
    return est


# --- CSV exchange -----------------------------------------------------------

def write_frf_csv(path, est: FrfEstimate) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "freq_hz", "g_re", "g_im", "variance", "status"])
        for b, f, g, v, s in zip(est.bins, est.freq_hz, est.g_hat, est.variance, est.status):
            w.writerow([int(b), repr(float(f)), repr(float(g.real)), repr(float(g.imag)), repr(float(v)), s])


def write_variance_csv(path, est: FrfEstimate) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "freq_hz", "variance", "std"])
        for b, f, v in zip(est.bins, est.freq_hz, est.variance):
            w.writerow([int(b), repr(float(f)), repr(float(v)), repr(float(np.sqrt(v)))])


def write_transient_csv(path, est: FrfEstimate) -> None:
    M = est.t_hat.size
    T_l = est.sampling_time * est.F
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "freq_hz", "t_re", "t_im", "noise_variance"])
        for k in range(M):
            t = est.t_hat[k]
            w.writerow([k, repr(k / (M * T_l)), repr(float(t.real)), repr(float(t.imag)),
                        repr(float(est.noise_variance[k]))])


def read_frf_csv(path, n_points: int, sampling_time: float, method: str = "") -> FrfEstimate:
    bins, g, var, status = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"bin", "g_re", "g_im"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise InvalidInputError(f"{path}: missing columns {sorted(need)}")
        for line, row in enumerate(reader, start=2):
            try:
                bins.append(int(row["bin"]))
                g.append(complex(float(row["g_re"]), float(row["g_im"])))
                var.append(float(row.get("variance") or "nan"))
                status.append(row.get("status") or OK)
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{line}: {exc}") from exc
    return FrfEstimate(np.array(g), np.array(var), np.array(status, dtype=object),
                       n_points, sampling_time, method, np.array(bins))
