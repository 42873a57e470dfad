"""Command-line front end: parses JSON configs, dispatches experiments,
writes CSV and binary trajectory artifacts.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .core import RecordMode, RngStream, SimConfig, make_time_grid, substream_id
from .harness import (
    EXPERIMENT_SLOTS,
    ErrorReport,
    ExperimentPlan,
    additive_probe,
    density_sup_error,
    gbm_probe,
    interbank_error,
    linear_drift_probe,
    ou_strong_error,
    temporal_order_probe,
)
from .integrator import NumericalAbort, simulate_particle_system, write_trajectory_dump
from .kde import KdeConfig
from .models import (
    CondOuParams,
    InterbankParams,
    affine_control,
    cond_ou_model,
    interbank_model,
    load_schedule_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# Allowed keys per config section; anything else is a hard error so typos
# in experiment parameters never pass silently.
_SECTION_KEYS = {
    "model": {"type", "dim", "sigma", "sigma0", "x0", "a", "b", "rho"},
    "grid": {"T", "M"},
    "plan": {"n_values", "min_exp", "max_exp", "replications", "seed", "p"},
    "kde": {"lo", "hi", "points", "kernel_order", "scale_by_std"},
    "control": {"c1", "c2"},
    "probe": {"type", "sigma", "mu", "rate", "x0", "h_values", "samples", "replications", "T"},
    "simulate": {"particles", "seed"},
}


def _check_keys(section: str, obj: dict):
    allowed = _SECTION_KEYS[section]
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key '{section}.{key}'")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for section, value in cfg.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section '{section}'")
        if not isinstance(value, dict):
            raise ConfigError(f"section '{section}' must be an object")
        _check_keys(section, value)
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form section.key=value")
        dotted, raw = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key '{dotted}' must be section.key")
        section, key = parts
        if section not in _SECTION_KEYS or key not in _SECTION_KEYS[section]:
            raise ConfigError(f"unknown key '{dotted}'")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        cfg.setdefault(section, {})[key] = value
    return cfg


def resolve_seed(cfg: dict, cli_seed) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    plan_seed = cfg.get("plan", {}).get("seed")
    if plan_seed is not None:
        return int(plan_seed)
    env = os.environ.get("MKV_SEED")
    if env is not None:
        return int(env)
    return 0


def preset_path(name: str) -> Path:
    ref = resources.files("mkvsim") / "presets" / f"{name}.json"
    if not ref.is_file():
        available = sorted(p.stem for p in (resources.files("mkvsim") / "presets").iterdir())
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(available)}")
    return Path(str(ref))


def _build_grid(cfg: dict):
    g = cfg.get("grid", {})
    return make_time_grid(float(g.get("T", 1.0)), int(g.get("M", 100)))


def _build_n_values(plan_cfg: dict):
    if "n_values" in plan_cfg:
        return [int(n) for n in plan_cfg["n_values"]]
    lo = int(plan_cfg.get("min_exp", 6))
    hi = int(plan_cfg.get("max_exp", 12))
    return [2**k for k in range(lo, hi + 1)]


def _build_plan(cfg: dict, seed: int) -> ExperimentPlan:
    p = cfg.get("plan", {})
    return ExperimentPlan(
        n_values=_build_n_values(p),
        replications_R=int(p.get("replications", 30)),
        seed=seed,
        grid=_build_grid(cfg),
        wasserstein_p=float(p.get("p", 2.0)),
    )


def _build_cond_ou(cfg: dict) -> CondOuParams:
    m = cfg.get("model", {})
    if m.get("type", "cond_ou") != "cond_ou":
        raise ConfigError(f"expected model.type 'cond_ou', got '{m.get('type')}'")
    return CondOuParams(
        dim_d=int(m.get("dim", 1)),
        sigma=float(m.get("sigma", math.sqrt(0.2))),
        sigma0=float(m.get("sigma0", math.sqrt(0.2))),
        x0=m.get("x0", 0.0),
    )


def _build_schedule(value):
    if isinstance(value, str):
        return load_schedule_csv(value)
    return float(value)


def _build_interbank(cfg: dict) -> InterbankParams:
    m = cfg.get("model", {})
    if m.get("type", "interbank") != "interbank":
        raise ConfigError(f"expected model.type 'interbank', got '{m.get('type')}'")
    ctrl_cfg = cfg.get("control", {})
    control = affine_control(
        c1=_build_schedule(ctrl_cfg.get("c1", 0.0)),
        c2=_build_schedule(ctrl_cfg.get("c2", 1.0)),
    )
    return InterbankParams(
        mean_reversion_a=float(m.get("a", 10.0)),
        liquidity_b=_build_schedule(m.get("b", 1.0)),
        sigma=float(m.get("sigma", 0.5)),
        rho=float(m.get("rho", 0.5)),
        control=control,
    )


def _build_kde(cfg: dict) -> KdeConfig:
    k = cfg.get("kde", {})
    return KdeConfig(
        bandwidth_eta=1.0,  # replaced per particle count by the harness
        grid_lo=float(k.get("lo", -3.0)),
        grid_hi=float(k.get("hi", 3.0)),
        grid_points=int(k.get("points", 601)),
        kernel_order_l=int(k.get("kernel_order", 5)),
    )


_PROBES = {
    "gbm": lambda p: gbm_probe(sigma=float(p.get("sigma", 1.0)), x0=float(p.get("x0", 1.0))),
    "linear_drift": lambda p: linear_drift_probe(
        rate=float(p.get("rate", 1.0)), x0=float(p.get("x0", 1.0))
    ),
    "additive": lambda p: additive_probe(
        mu=float(p.get("mu", 0.5)), sigma=float(p.get("sigma", 1.0)), x0=float(p.get("x0", 0.0))
    ),
}


def _run_experiment(subcommand: str, cfg: dict, seed: int, threads: int) -> ErrorReport:
    if subcommand == "ou-converge":
        return ou_strong_error(_build_plan(cfg, seed), _build_cond_ou(cfg), threads=threads)
    if subcommand == "ou-density":
        return density_sup_error(
            _build_plan(cfg, seed),
            _build_cond_ou(cfg),
            _build_kde(cfg),
            threads=threads,
            scale_bandwidth_by_std=bool(cfg.get("kde", {}).get("scale_by_std", False)),
        )
    if subcommand == "interbank":
        return interbank_error(_build_plan(cfg, seed), _build_interbank(cfg), threads=threads)
    if subcommand == "probe-temporal":
        p = cfg.get("probe", {})
        kind = p.get("type", "gbm")
        if kind not in _PROBES:
            raise ConfigError(f"unknown key 'probe.type' value '{kind}'")
        h_values = p.get("h_values", [2.0**-k for k in range(4, 10)])
        return temporal_order_probe(
            _PROBES[kind](p),
            h_values=[float(h) for h in h_values],
            replications_R=int(p.get("replications", 4)),
            samples=int(p.get("samples", 4096)),
            seed=seed,
            T=float(p.get("T", 1.0)),
            threads=threads,
        )
    raise ConfigError(f"unknown experiment '{subcommand}'")


def _run_simulate(cfg: dict, seed: int, out_dir: Path) -> None:
    model_type = cfg.get("model", {}).get("type", "cond_ou")
    if model_type == "cond_ou":
        model = cond_ou_model(_build_cond_ou(cfg))
    elif model_type == "interbank":
        model = interbank_model(_build_interbank(cfg))
    else:
        raise ConfigError(f"unknown key 'model.type' value '{model_type}'")
    grid = _build_grid(cfg)
    N = int(cfg.get("simulate", {}).get("particles", 256))
    config = SimConfig(
        model=model,
        grid=grid,
        particles_N=N,
        seed=seed,
        record_mode=RecordMode.FULL_TRAJECTORIES,
    )
    stream = RngStream(seed, substream_id(EXPERIMENT_SLOTS["simulate"], 0, 0))
    bundle = simulate_particle_system(config, stream)
    dump = out_dir / "trajectories.mkv"
    write_trajectory_dump(bundle, dump)
    print(f"wrote {dump}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkvsim",
        description="Particle-method simulation and convergence experiments "
        "for mean-field SDEs with common noise.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("ou-converge", "ou-density", "interbank", "probe-temporal", "simulate"):
        sp = sub.add_parser(name)
        group = sp.add_mutually_exclusive_group(required=True)
        group.add_argument("--config", help="path to a JSON config file")
        group.add_argument("--preset", help="name of a packaged preset config")
        sp.add_argument("--out-dir", default=".", help="directory for output artifacts")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (JSON-parsed)",
        )
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize everything else
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK

    try:
        config_path = preset_path(args.preset) if args.preset else Path(args.config)
        cfg = load_config(config_path)
        cfg = apply_overrides(cfg, args.overrides)
        seed = resolve_seed(cfg, args.seed)
        cfg.setdefault("plan", {})["seed"] = seed

        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "effective_config.json", "w") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")

        if args.subcommand == "simulate":
            _run_simulate(cfg, seed, out_dir)
            return EXIT_OK

        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        report = _run_experiment(args.subcommand, cfg, seed, args.threads)
        csv_path = out_dir / f"{args.subcommand}.csv"
        report.to_csv(csv_path)
        print(f"slope={report.slope}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
