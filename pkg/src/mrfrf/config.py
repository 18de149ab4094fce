"""Experiment configuration read from TOML.

Keys follow the wafer-stage settings table (``fast_sampling_time``,
``downsampling_factor``, ``window_size``, ...). Example::

    [experiment]
    fast_sampling_time = 0.0005
    downsampling_factor = 3
    number_of_input_samples = 1200
    methods = ["LRM", "LPM", "SA"]

    [plant]
    modes = [[120.0, 0.02, 1.0], [520.0, 0.01, -0.5]]

    [noise]
    snr_db = 45.0
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .estimator import EstimatorConfig
from .exceptions import InvalidConfigError
from .harness import SaConfig
from .refine import RefineConfig

METHODS = ("LRM", "LPM", "SA", "LRM+SK", "LRM+SK+LM")


@dataclass
class PlantConfig:
    modes: list = field(default_factory=lambda: [[120.0, 0.02, 1.0], [520.0, 0.01, -0.5]])
    static_gain: float = 0.0
    b: list | None = None
    a: list | None = None
    # random initial state, so the record carries a transient
    initial_state_scale: float = 0.1
    initial_state_seed: int = 2


@dataclass
class ExcitationConfig:
    rms: float = 1.44
    seed: int = 0
    excited_bins: list | None = None


@dataclass
class NoiseConfig:
    snr_db: float | None = 45.0
    variance: float | None = None
    seed: int = 1


@dataclass
class DataConfig:
    input: str | None = None
    output: str | None = None
    true_frf: str | None = None


@dataclass
class ExperimentConfig:
    fast_sampling_time: float = 0.5e-3
    downsampling_factor: int = 3
    number_of_input_samples: int = 1200
    methods: tuple = METHODS
    output_dir: str = "out"
    threads: int = 1
    plant: PlantConfig | None = field(default_factory=PlantConfig)
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    lpm: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(3, 18, 2, 2, 0))
    refine: RefineConfig = field(default_factory=RefineConfig)
    spectral_analysis: SaConfig = field(default_factory=SaConfig)
    data: DataConfig = field(default_factory=DataConfig)

    @property
    def number_of_output_samples(self) -> int:
        return self.number_of_input_samples // self.downsampling_factor

    @property
    def slow_sampling_time(self) -> float:
        return self.fast_sampling_time * self.downsampling_factor

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Derive every random seed from one integer."""
        return replace(
            self,
            excitation=replace(self.excitation, seed=seed),
            noise=replace(self.noise, seed=seed + 1),
            plant=None if self.plant is None else replace(self.plant, initial_state_seed=seed + 2),
        )

    def check(self) -> None:
        F, N = self.downsampling_factor, self.number_of_input_samples
        if F < 1 or N < 1:
            raise InvalidConfigError("downsampling_factor and number_of_input_samples must be >= 1")
        if N % F:
            raise InvalidConfigError(f"number_of_input_samples={N} is not divisible by F={F}")
        if not self.fast_sampling_time > 0:
            raise InvalidConfigError("fast_sampling_time must be > 0")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
        for name in ("estimator", "lpm"):
            if getattr(self, name).F != F:
                raise InvalidConfigError(f"[{name}] downsampling factor differs from [experiment]")


def _estimator(d: dict, F: int, default: EstimatorConfig) -> EstimatorConfig:
    return EstimatorConfig(
        F=F,
        n_w=d.get("window_size", default.n_w),
        R_g=d.get("system_numerator_degree", default.R_g),
        R_t=d.get("transient_numerator_degree", default.R_t),
        R_e=d.get("denominator_degree", default.R_e),
        rcond_min=d.get("rcond_min", default.rcond_min),
    )


def _section(cls, d: dict | None):
    d = dict(d or {})
    known = cls.__dataclass_fields__
    unknown = set(d) - set(known)
    if unknown:
        raise InvalidConfigError(f"unknown keys {sorted(unknown)} for {cls.__name__}")
    return cls(**d)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


def config_from_dict(raw: dict, base_dir=Path(".")) -> ExperimentConfig:
    exp = dict(raw.get("experiment", {}))
    F = int(exp.get("downsampling_factor", 3))
    kw = {k: exp[k] for k in ("fast_sampling_time", "downsampling_factor",
                               "number_of_input_samples", "output_dir", "threads") if k in exp}
    if "methods" in exp:
        kw["methods"] = tuple(exp["methods"])
    try:
        cfg = ExperimentConfig(
            **kw,
            plant=_section(PlantConfig, raw["plant"]) if "plant" in raw else None,
            excitation=_section(ExcitationConfig, raw.get("excitation")),
            noise=_section(NoiseConfig, raw.get("noise")),
            estimator=_estimator(raw.get("estimator", {}), F, EstimatorConfig()),
            lpm=_estimator(raw.get("lpm", {}), F, EstimatorConfig(F, 18, 2, 2, 0)),
            refine=_section(RefineConfig, raw.get("refine")),
            spectral_analysis=_section(SaConfig, raw.get("spectral_analysis")),
            data=_section(DataConfig, raw.get("data")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfigError):
            raise
        raise InvalidConfigError(str(exc)) from exc
    if not Path(cfg.output_dir).is_absolute():
        cfg.output_dir = str(Path(base_dir) / cfg.output_dir)
    for name in ("input", "output", "true_frf"):
        v = getattr(cfg.data, name)
        if v is not None and not Path(v).is_absolute():
            setattr(cfg.data, name, str(Path(base_dir) / v))
    cfg.check()
    return cfg
