"""Synthetic multirate experiments and method comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .estimator import identify_frf, validate_config
from .exceptions import InvalidConfigError
from .harness import cumulative_frf_error_curve, spectral_analysis, to_fine_grid
from .lti import (
    NoiseSpec,
    RationalSystem,
    add_noise,
    freqresp,
    make_resonant_plant,
    noise_variance_for_snr,
    simulate,
)
from .refine import refine_frf
from .signals import MultisineSpec, Spectrum, TimeSignal, dft, downsample, frequency_grid, generate_multisine


@dataclass
class ExperimentData:
    u_h: TimeSignal
    y_l: TimeSignal
    y_h: TimeSignal | None = None
    y_l_clean: TimeSignal | None = None
    plant: RationalSystem | None = None
    G_true: Spectrum | None = None
    noise_variance: float = 0.0


def build_plant(cfg: ExperimentConfig) -> RationalSystem:
    p = cfg.plant
    if p is None:
        raise InvalidConfigError("no [plant] section in the configuration")
    if p.b is not None or p.a is not None:
        if p.b is None or p.a is None:
            raise InvalidConfigError("explicit plants need both b and a")
        return RationalSystem(p.b, p.a, cfg.fast_sampling_time)
    return make_resonant_plant([tuple(m) for m in p.modes], cfg.fast_sampling_time, p.static_gain)


def make_input(cfg: ExperimentConfig) -> TimeSignal:
    ex = cfg.excitation
    bins = None if ex.excited_bins is None else tuple(ex.excited_bins)
    spec = MultisineSpec(cfg.number_of_input_samples, ex.rms, bins, ex.seed)
    return generate_multisine(spec, cfg.fast_sampling_time)


def check_before_run(cfg: ExperimentConfig, u_h: TimeSignal) -> list:
    """All uniqueness violations of the configured local-model estimators."""
    U = dft(u_h)
    out = []
    for name, est in (("estimator", cfg.estimator), ("lpm", cfg.lpm)):
        wanted = name == "estimator" and any(m.startswith("LRM") for m in cfg.methods)
        wanted |= name == "lpm" and "LPM" in cfg.methods
        if wanted:
            out += [(name, v) for v in validate_config(est, cfg.number_of_output_samples, U)]
    return out


def synthesize(cfg: ExperimentConfig) -> ExperimentData:
    """Simulate one record: multisine in, transient-laden fast output, noisy slow output."""
    plant = build_plant(cfg)
    u_h = make_input(cfg)
    n_state = max(plant.a.size, plant.b.size) - 1
    rng = np.random.default_rng(cfg.plant.initial_state_seed)
    zi = cfg.plant.initial_state_scale * rng.standard_normal(n_state) if n_state else None
    y_h = simulate(plant, u_h, zi)
    y_l_clean = downsample(y_h, cfg.downsampling_factor)
    nz = cfg.noise
    if nz.variance is not None:
        var = float(nz.variance)
    elif nz.snr_db is not None:
        var = noise_variance_for_snr(y_l_clean, nz.snr_db)
    else:
        var = 0.0
    y_l = add_noise(y_l_clean, NoiseSpec(var, nz.seed))
    G = freqresp(plant, frequency_grid(cfg.number_of_input_samples, cfg.fast_sampling_time))
    return ExperimentData(u_h, y_l, y_h, y_l_clean, plant, G, var)


def run_method(method: str, u_h: TimeSignal, y_l: TimeSignal, cfg: ExperimentConfig):
    """Estimate the FRF with one method; returns ``(estimate, traces or None)``."""
    F = cfg.downsampling_factor
    if method == "SA":
        return spectral_analysis(u_h, y_l, F, cfg.spectral_analysis), None
    U, Y = dft(u_h), dft(y_l)
    if method == "LPM":
        return identify_frf(U, Y, cfg.lpm, "LPM", threads=cfg.threads), None
    if method == "LRM":
        return identify_frf(U, Y, cfg.estimator, "LRM", threads=cfg.threads), None
    if method in ("LRM+SK", "LRM+SK+LM"):
        return refine_frf(U, Y, cfg.estimator, cfg.refine, sk=True, lm=method.endswith("LM"),
                          threads=cfg.threads)
    raise InvalidConfigError(f"unknown method {method!r}")


def comparison(G_true, estimates: dict) -> dict:
    """Cumulative-error curves per method; coarse estimates are interpolated first."""
    out = {}
    for name, est in estimates.items():
        if est is None:
            out[name] = None
            continue
        fine = to_fine_grid(est) if est.bins.size != est.n_points else est
        out[name] = cumulative_frf_error_curve(G_true, fine)[0]
    return out


def ranking(curves: dict, n: int) -> list:
    """``(method, error at n)`` sorted best first; absent methods last."""
    present = sorted((float(c[n]), m) for m, c in curves.items() if c is not None)
    absent = [(m, None) for m, c in curves.items() if c is None]
    return [(m, v) for v, m in present] + absent
