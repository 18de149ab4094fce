"""Command-line front end.

    mrfrf simulate --config exp.toml --out data/
    mrfrf identify --config exp.toml --out data/ --methods LRM,LPM,SA
    mrfrf compare  --config exp.toml --out data/
    mrfrf validate --config exp.toml

Exit codes: 0 success, 2 config/validation error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .config import METHODS, ExperimentConfig, load_config
from .estimator import (
    FrfEstimate,
    read_frf_csv,
    write_frf_csv,
    write_transient_csv,
    write_variance_csv,
)
from .exceptions import InvalidConfigError, InvalidInputError
from .refine import aggregate_traces
from .signals import SLOW, read_signal_csv, write_signal_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("mrfrf")


def slug(method: str) -> str:
    return method.lower().replace("+", "_")


def frf_path(out: Path, method: str) -> Path:
    return out / f"frf_{slug(method)}.csv"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    if getattr(args, "methods", None):
        cfg.methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads:
        cfg.threads = (os.cpu_count() or 1) if args.threads == "auto" else int(args.threads)
    cfg.check()
    return cfg


def _fail_on_violations(cfg, u_h):
    bad = ex.check_before_run(cfg, u_h)
    if bad:
        msg = "\n".join(f"[{sec}] condition ({v.label}) violated: {v.message}" for sec, v in bad)
        raise CliError(msg, EXIT_CONFIG)


def write_true_frf(path, G, sampling_time):
    N = G.n_points
    est = FrfEstimate(G.coefficients, np.zeros(N), np.full(N, "ok", dtype=object), N, sampling_time, "true")
    write_frf_csv(path, est)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    u_h = ex.make_input(cfg)
    _fail_on_violations(cfg, u_h)
    data = ex.synthesize(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_signal_csv(out / "u_h.csv", data.u_h)
    write_signal_csv(out / "y_h.csv", data.y_h)
    write_signal_csv(out / "y_l.csv", data.y_l)
    write_true_frf(out / "true_frf.csv", data.G_true, cfg.fast_sampling_time)
    (out / "plant.toml").write_text(data.plant.to_text())
    log.info("wrote %d input and %d output samples to %s", len(data.u_h), len(data.y_l), out)
    return EXIT_OK


def _read_data(cfg: ExperimentConfig):
    out = Path(cfg.output_dir)
    u_path = Path(cfg.data.input or out / "u_h.csv")
    y_path = Path(cfg.data.output or out / "y_l.csv")
    u_h = read_signal_csv(u_path, cfg.fast_sampling_time)
    y_l = read_signal_csv(y_path, cfg.slow_sampling_time, SLOW)
    F = cfg.downsampling_factor
    if len(u_h) != cfg.number_of_input_samples:
        raise InvalidInputError(
            f"{u_path}: {len(u_h)} samples, config says number_of_input_samples={cfg.number_of_input_samples}"
        )
    if len(y_l) * F != len(u_h):
        raise InvalidInputError(f"{y_path}: {len(y_l)} samples, expected {len(u_h) // F}")
    return u_h, y_l


def _true_frf(cfg: ExperimentConfig):
    path = Path(cfg.data.true_frf or Path(cfg.output_dir) / "true_frf.csv")
    if not path.exists():
        return None
    est = read_frf_csv(path, cfg.number_of_input_samples, cfg.fast_sampling_time, "true")
    if est.bins.size != cfg.number_of_input_samples:
        raise InvalidInputError(f"{path}: true FRF must cover all {cfg.number_of_input_samples} bins")
    return est.on_full_grid()


def write_traces(out: Path, method: str, traces) -> None:
    with open(out / f"traces_{slug(method)}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "iteration", "phase", "J_SK", "J_LS"])
        for k, t in enumerate(traces):
            if t is None:
                continue
            for i, (p, a, b) in enumerate(zip(t.phase, t.J_SK, t.J_LS)):
                w.writerow([k, i, p, repr(a), repr(b)])
    sk, ls = aggregate_traces(traces)
    with open(out / f"mean_costs_{slug(method)}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "mu_SK", "mu_OE"])
        for i, (a, b) in enumerate(zip(sk, ls)):
            w.writerow([i, repr(float(a)), repr(float(b))])


def write_comparison(out: Path, curves: dict, n_report: int) -> list:
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "cumulative_error"])
        for m, c in curves.items():
            if c is None:
                w.writerow([m, "", "absent"])
                continue
            for n in range(1, c.size):
                w.writerow([m, n, repr(float(c[n]))])
    rank = ex.ranking(curves, n_report)
    with open(out / "ranking.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "method", "n", "cumulative_error"])
        for i, (m, v) in enumerate(rank, start=1):
            w.writerow([i if v is not None else "", m, n_report, "absent" if v is None else repr(v)])
    return rank


def _print_ranking(rank, n):
    print(f"cumulative FRF error at n={n}:")
    for i, (m, v) in enumerate(rank, start=1):
        print(f"  {i}. {m:<10s} {'absent' if v is None else f'{v:.6g}'}")


def cmd_identify(cfg: ExperimentConfig) -> int:
    u_h, y_l = _read_data(cfg)
    _fail_on_violations(cfg, u_h)
    G = _true_frf(cfg)
    results = {}
    for m in cfg.methods:
        results[m] = ex.run_method(m, u_h, y_l, cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m, (est, traces) in results.items():
        write_frf_csv(frf_path(out, m), est)
        write_variance_csv(out / f"variance_{slug(m)}.csv", est)
        if est.t_hat is not None:
            write_transient_csv(out / f"transient_{slug(m)}.csv", est)
        if traces is not None:
            write_traces(out, m, traces)
        n_bad = int(np.sum(est.status != "ok"))
        if n_bad:
            log.warning("%s: %d bins without a valid estimate", m, n_bad)
    if G is not None:
        curves = ex.comparison(G, {m: r[0] for m, r in results.items()})
        n = cfg.number_of_input_samples // 2
        _print_ranking(write_comparison(out, curves, n), n)
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    G = _true_frf(cfg)
    if G is None:
        raise CliError("no true FRF available (true_frf.csv)", EXIT_IO)
    N = cfg.number_of_input_samples
    estimates = {}
    for m in cfg.methods:
        p = frf_path(out, m)
        if not p.exists():
            log.warning("%s: %s not found, reported as absent", m, p)
            estimates[m] = None
            continue
        est = read_frf_csv(p, N, cfg.fast_sampling_time, m)
        if est.bins.max() >= N or (est.bins.size != N and N % est.bins.size):
            raise CliError(f"{p}: frequency grid does not match N={N}", EXIT_NUMERIC)
        estimates[m] = est
    curves = ex.comparison(G, estimates)
    n = N // 2
    _print_ranking(write_comparison(out, curves, n), n)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig) -> int:
    if cfg.plant is not None and cfg.data.input is None:
        u_h = ex.make_input(cfg)
    else:
        u_h, _ = _read_data(cfg)
    bad = ex.check_before_run(cfg, u_h)
    for sec, v in bad:
        print(f"[{sec}] condition ({v.label}) violated: {v.message}")
    if bad:
        return EXIT_CONFIG
    for name, est in (("estimator", cfg.estimator), ("lpm", cfg.lpm)):
        print(f"[{name}] {est.n_params} parameters <= {est.window_length} window points "
              f"<= {cfg.number_of_output_samples} output samples: ok")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "identify": cmd_identify,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrfrf", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment TOML file")
        s.add_argument("--out", help="output directory (overrides experiment.output_dir)")
        s.add_argument("--seed", type=int, help="derive all random seeds from this integer")
        s.add_argument("--threads", help="worker threads for the per-bin sweep, or 'auto'")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("identify", "compare", "validate"):
            s.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InvalidConfigError as exc:
        labels = f" (condition {', '.join(exc.labels)})" if exc.labels else ""
        print(f"config error{labels}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidInputError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
