"""Iterative refinement of the closed-form local rational fit.

Two schemes act per window on the same parameter vector:

* Sanathanan-Koerner (SK): reweight the linearised problem with the inverse
  of the previous denominator and re-solve.
* Levenberg-Marquardt (LM): damped Gauss-Newton on the original output-error
  cost, with real and imaginary parts of residual and parameters stacked.

Both work internally in the basis ``rho = r / n_w``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .estimator import (
    OK,
    EstimatorConfig,
    FrfEstimate,
    ParameterVector,
    _regressor,
    eval_estimated_output,
    extract_frf,
    identify_frf,
    band_window,
    solve_window,
)
from .exceptions import InvalidConfigError, RankDeficientWindowError
from .signals import Spectrum

log = logging.getLogger(__name__)

POLE_TOL = 1e-14


@dataclass(frozen=True)
class RefineConfig:
    sk_max_iter: int = 30
    lm_max_iter: int = 300
    rel_tol: float = 1e-9
    lm_damping_init: float = 1e-3
    lm_damping_up: float = 10.0
    lm_damping_down: float = 0.1
    lm_damping_max: float = 1e12
    sk_max_increases: int = 3

    def __post_init__(self):
        if self.sk_max_iter < 0 or self.lm_max_iter < 0:
            raise InvalidConfigError("iteration counts must be >= 0")
        if not (self.rel_tol > 0 and self.lm_damping_init > 0):
            raise InvalidConfigError("tolerances must be > 0")
        if not (self.lm_damping_up > 1 and 0 < self.lm_damping_down < 1):
            raise InvalidConfigError("damping multipliers must satisfy up > 1 and 0 < down < 1")


@dataclass
class CostTrace:
    """Per-iteration costs of one window; entry 0 is the starting point."""

    J_SK: list = field(default_factory=list)
    J_LS: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    converged: bool = True
    warning: str = ""

    def append(self, j_sk, j_ls, phase):
        self.J_SK.append(float(j_sk))
        self.J_LS.append(float(j_ls))
        self.phase.append(phase)

    def extend(self, other: "CostTrace") -> "CostTrace":
        # `other` starts where self ended; drop its duplicate starting point
        out = CostTrace(self.J_SK + other.J_SK[1:], self.J_LS + other.J_LS[1:],
                        self.phase + other.phase[1:], self.converged and other.converged,
                        "; ".join(w for w in (self.warning, other.warning) if w))
        return out

    def __len__(self):
        return len(self.J_LS)


class _Window:
    """Scaled data of one local window, split into numerator and denominator parts."""

    def __init__(self, U: Spectrum, Y_l: Spectrum, k: int, cfg: EstimatorConfig):
        self.cfg = cfg
        self.k = k
        self.scale = float(max(cfg.n_w, 1))
        M = Y_l.n_points
        K, self.Y, self.r = _regressor(U, Y_l, k, cfg, M, self.scale)
        self.n_num = K.shape[0] - cfg.R_e
        self.K = K
        self.Kn = K[: self.n_num]
        rho = self.r / self.scale
        self.Pe = rho[None, :] ** np.arange(1, cfg.R_e + 1)[:, None]  # (R_e, W)

    def to_scaled(self, theta: ParameterVector) -> np.ndarray:
        return theta.rescaled(self.scale).values

    def from_scaled(self, x: np.ndarray) -> ParameterVector:
        return ParameterVector.for_config(x, self.cfg).rescaled(1.0 / self.scale)

    def denominator(self, x):
        return 1.0 + x[self.n_num :] @ self.Pe

    def numerator(self, x):
        return x[: self.n_num] @ self.Kn

    def residual(self, x):
        """Output error ``Y - N/e``; ``None`` when the denominator vanishes."""
        e = self.denominator(x)
        if np.any(np.abs(e) < POLE_TOL):
            return None
        return self.Y - self.numerator(x) / e

    def j_ls(self, x) -> float:
        res = self.residual(x)
        return np.inf if res is None else float(np.vdot(res, res).real)

    def j_sk(self, x, x_prev) -> float:
        w = 1.0 if x_prev is None else 1.0 / self.denominator(x_prev)
        lin = self.Y * self.denominator(x) - self.numerator(x)
        v = w * lin
        return float(np.vdot(v, v).real)

    def complex_jacobian(self, x) -> np.ndarray:
        """``d residual / d theta`` (holomorphic), shape ``(W, p)``."""
        e = self.denominator(x)
        n = self.numerator(x)
        Jn = -(self.Kn / e).T
        Je = ((n / e**2) * self.Pe).T
        return np.hstack([Jn, Je])

    def real_jacobian(self, x) -> np.ndarray:
        """Jacobian of ``[Re res; Im res]`` w.r.t. ``[Re theta; Im theta]``."""
        J = self.complex_jacobian(x)
        return np.block([[J.real, -J.imag], [J.imag, J.real]])


def _pack(x):
    return np.concatenate([x.real, x.imag])


def _unpack(v):
    p = v.size // 2
    return v[:p] + 1j * v[p:]


def eval_nonlinear_cost(theta: ParameterVector, U: Spectrum, Y_l: Spectrum, k: int, n_w: int) -> float:
    """Output-error cost ``sum_r |Y_l(k+r) - Yhat_l(k+r)|^2`` over the window at ``k``."""
    bins = band_window(k, n_w, Y_l.n_points)
    Yhat = eval_estimated_output(theta, U, k, bins - k)
    res = Y_l[bins] - Yhat
    return float(np.vdot(res, res).real)


def real_residual(theta: ParameterVector, U, Y_l, k, cfg) -> tuple:
    """Stacked real residual and its Jacobian at ``theta`` (scaled basis).

    Exposed for derivative checks; the parameter vector is
    ``[Re x; Im x]`` with ``x`` the scaled coefficients.
    """
    w = _Window(U, Y_l, k, cfg)
    x = w.to_scaled(theta)
    res = w.residual(x)
    return _pack(res), w.real_jacobian(x), w


def sk_iterate(theta0: ParameterVector, U: Spectrum, Y_l: Spectrum, k: int,
               cfg: EstimatorConfig, refine_cfg: RefineConfig = RefineConfig(), _window=None):
    """Sanathanan-Koerner iterations started from ``theta0``."""
    w = _window or _Window(U, Y_l, k, cfg)
    x = w.to_scaled(theta0)
    trace = CostTrace()
    trace.append(w.j_sk(x, None), w.j_ls(x), "init")
    best_x, best_ls = x, trace.J_LS[0]
    floor = 1e-28 * float(np.vdot(w.Y, w.Y).real)
    increases = 0
    for _ in range(refine_cfg.sk_max_iter):
        if trace.J_SK[-1] <= floor:
            break
        e_prev = w.denominator(x)
        if np.any(np.abs(e_prev) < POLE_TOL):
            trace.converged, trace.warning = False, f"SK aborted at k={k}: vanishing denominator"
            break
        wt = 1.0 / e_prev
        try:
            x_new, _, _ = solve_window(w.K * wt[None, :], w.Y * wt, k, cfg.rcond_min)
        except RankDeficientWindowError as exc:
            trace.converged, trace.warning = False, f"SK aborted: {exc}"
            break
        j_sk, j_ls = w.j_sk(x_new, x), w.j_ls(x_new)
        prev = trace.J_SK[-1]
        trace.append(j_sk, j_ls, "SK")
        x = x_new
        if j_ls < best_ls:
            best_x, best_ls = x, j_ls
        increases = increases + 1 if j_sk > prev else 0
        if increases >= refine_cfg.sk_max_increases:
            trace.converged, trace.warning = False, f"SK diverging at k={k}; best iterate kept"
            x = best_x
            break
        if abs(prev - j_sk) <= refine_cfg.rel_tol * max(prev, floor):
            break
    if trace.warning:
        log.debug(trace.warning)
    return w.from_scaled(x), trace


def lm_refine(theta_init: ParameterVector, U: Spectrum, Y_l: Spectrum, k: int,
              cfg: EstimatorConfig, refine_cfg: RefineConfig = RefineConfig(), _window=None):
    """Levenberg-Marquardt minimisation of the output-error cost.

    Only steps that strictly lower the cost are accepted, so the returned
    trace is non-increasing.
    """
    w = _window or _Window(U, Y_l, k, cfg)
    x = w.to_scaled(theta_init)
    cost = w.j_ls(x)
    trace = CostTrace()
    trace.append(cost, cost, "init")
    floor = 1e-28 * float(np.vdot(w.Y, w.Y).real)
    lam = refine_cfg.lm_damping_init
    need_jac = True
    for _ in range(refine_cfg.lm_max_iter):
        if not np.isfinite(cost) or cost <= floor:
            break
        if need_jac:
            r = _pack(w.residual(x))
            J = w.real_jacobian(x)
            JtJ = J.T @ J
            g = J.T @ r
            d = np.diag(JtJ).copy()
            d = np.maximum(d, 1e-12 * max(d.max(), 1e-300))
            need_jac = False
        try:
            step = sla.solve(JtJ + lam * np.diag(d), -g, assume_a="pos")
        except (np.linalg.LinAlgError, sla.LinAlgWarning):
            step = None
        x_try = x + _unpack(step) if step is not None else None
        cost_try = w.j_ls(x_try) if x_try is not None else np.inf
        if cost_try < cost:
            rel = (cost - cost_try) / cost
            x, cost = x_try, cost_try
            lam = max(lam * refine_cfg.lm_damping_down, 1e-15)
            need_jac = True
            trace.append(cost, cost, "LM")
            if rel < refine_cfg.rel_tol:
                break
        else:
            lam *= refine_cfg.lm_damping_up
            if lam > refine_cfg.lm_damping_max:
                trace.converged = False
                trace.warning = f"LM stalled at k={k}: damping above {refine_cfg.lm_damping_max:g}"
                break
    return w.from_scaled(x), trace


def mean_costs(traces) -> tuple:
    """Mean final ``J_SK`` and ``J_LS`` over the given window traces."""
    traces = [t for t in traces if t is not None and len(t)]
    if not traces:
        return float("nan"), float("nan")
    return (float(np.mean([t.J_SK[-1] for t in traces])),
            float(np.mean([t.J_LS[-1] for t in traces])))


def aggregate_traces(traces) -> tuple:
    """Per-iteration ``mu_SK`` and ``mu_OE``.

    Windows that stopped early hold their last value.
    """
    traces = [t for t in traces if t is not None and len(t)]
    n = max(len(t) for t in traces)
    pad = lambda v: np.concatenate([v, np.full(n - len(v), v[-1])])  # noqa: E731
    sk = np.mean([pad(np.asarray(t.J_SK)) for t in traces], axis=0)
    ls = np.mean([pad(np.asarray(t.J_LS)) for t in traces], axis=0)
    return sk, ls


def refine_frf(U: Spectrum, Y_l: Spectrum, cfg: EstimatorConfig,
               refine_cfg: RefineConfig = RefineConfig(), sk: bool = True, lm: bool = True,
               threads: int = 1):
    """Closed-form fit followed by SK and/or LM refinement in every window.

    The reported variance is the closed-form one.

    Returns
    -------
    estimate : FrfEstimate
    traces : list of CostTrace (``None`` for windows without a closed-form fit)
    """
    base, solves = identify_frf(U, Y_l, cfg, keep_solves=True, threads=threads)
    M, F = Y_l.n_points, cfg.F
    method = "LRM" + ("+SK" if sk else "") + ("+LM" if lm else "")

    def one(k):
        s = solves[k]
        if s is None:
            return None, None
        win = _Window(U, Y_l, k, cfg)
        theta, trace = s.theta, None
        if sk:
            theta, trace = sk_iterate(theta, U, Y_l, k, cfg, refine_cfg, win)
        if lm:
            theta, t2 = lm_refine(theta, U, Y_l, k, cfg, refine_cfg, win)
            trace = t2 if trace is None else trace.extend(t2)
        return theta, trace

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            out = list(pool.map(one, range(M)))
    else:
        out = [one(k) for k in range(M)]

    n_warn = sum(1 for _, t in out if t is not None and not t.converged)
    if n_warn:
        log.info("%d of %d windows stopped without converging", n_warn, M)
    g = base.g_hat.copy()
    t_hat = base.t_hat.copy()
    for k, (theta, _) in enumerate(out):
        if theta is not None:
            g[k + M * np.arange(F)], t_hat[k] = extract_frf(theta)
    est = FrfEstimate(g, base.variance.copy(), base.status.copy(), base.n_points,
                      base.sampling_time, method, None, t_hat, base.noise_variance.copy(), F)
    return est, [t for _, t in out]
