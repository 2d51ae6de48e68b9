"""Run-configuration files: INI-style sections, strictly validated.

A config file fully determines an experiment (together with the CLI
overrides); unknown sections or keys are rejected so that typos fail loudly
before any computation starts.
"""

from __future__ import annotations

import configparser
import os

import numpy as np

from .curves import (
    ConstantCurve,
    NelsonSiegelCurve,
    NelsonSiegelNNCurve,
    PiecewiseConstantCurve,
    read_nn_weights,
)
from .errors import ConfigError, DomainError
from .paths import GridSchedule, ModelParams


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}") from None


def _parse_int(s: str) -> int:
    try:
        return int(s, 0)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}") from None


def _parse_float_list(s: str) -> list:
    try:
        return [float(p) for p in s.split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {s!r}") from None


def _parse_str(s: str) -> str:
    return s.strip()


#: section -> {key: parser}; every config key must appear here.
SCHEMA = {
    "model": {
        "curve": _parse_str,              # constant | pwc | ns | ns_nn
        "xi0": _parse_float,              # constant level
        "pillars": _parse_float_list,     # pwc
        "levels": _parse_float_list,      # pwc
        "beta0": _parse_float,            # ns / ns_nn
        "beta1": _parse_float,
        "beta2": _parse_float,
        "tau_ns": _parse_float,
        "kappa": _parse_float,            # ns_nn
        "weights_file": _parse_str,       # ns_nn
        "hurst": _parse_float,
        "rho": _parse_float,
        "eta": _parse_float,
        "s0": _parse_float,
        "r": _parse_float,
    },
    "grid": {
        "n": _parse_int,
        "tau": _parse_float,
        "maturities": _parse_float_list,
    },
    "run": {
        "seed": _parse_int,
        "threads": _parse_int,
        "m": _parse_int,
        "scheme": _parse_str,
        "eps": _parse_float,
        "chunk_size": _parse_int,
    },
    "gen_nodes": {
        "hurst": _parse_float,
        "delta": _parse_float,
        "horizon": _parse_float,
        "eps": _parse_float,
    },
    "smile": {
        "log_strikes": _parse_float_list,
        "benchmark": _parse_str,
    },
    "surface": {
        "maturities": _parse_float_list,
        "k_min": _parse_float,
        "k_max": _parse_float,
        "k_count": _parse_int,
        "scale_by_sqrt_t": _parse_bool,
        "benchmark": _parse_str,
    },
    "calibrate": {
        "loss": _parse_str,
        "market_file": _parse_str,
        "strikes": _parse_float_list,     # mse contracts (calls), one per strike x maturity
        "kernel_eps": _parse_float,
        "eps_stop": _parse_float,
        "patience": _parse_int,
        "delta_min": _parse_float,
        "max_iters": _parse_int,
        "fd_step": _parse_float,
        "space": _parse_str,
        "calibrate_scalars": _parse_bool,
        "regen_threshold": _parse_float,
    },
    "truth": {
        "xi0": _parse_float,
        "hurst": _parse_float,
        "rho": _parse_float,
        "eta": _parse_float,
    },
    "barrier": {
        "kinds": _parse_str,              # dop | uoc | dop,uoc
        "dop_strike": _parse_float,
        "uoc_strike": _parse_float,
        "dop_barriers": _parse_float_list,
        "uoc_barriers": _parse_float_list,
    },
    "landscape": {
        "params": _parse_str,             # e.g. "hurst,eta"
        "range1": _parse_float_list,
        "range2": _parse_float_list,
        "grid": _parse_int,
        "loss": _parse_str,
    },
}


def load_config(path) -> dict:
    """Parse and schema-validate a config file into {section: {key: value}}."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        keys = SCHEMA[section]
        parsed = {}
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            parsed[key] = keys[key](raw)
        out[section] = parsed
    return out


def require(cfg: dict, section: str, *keys):
    """Fetch mandatory keys from a section, with precise error messages."""
    if section not in cfg:
        raise ConfigError(f"missing config section [{section}]")
    vals = []
    for key in keys:
        if key not in cfg[section]:
            raise ConfigError(f"missing key {key!r} in section [{section}]")
        vals.append(cfg[section][key])
    return vals[0] if len(keys) == 1 else vals


def build_curve(model: dict):
    """Forward-variance curve from the [model] section."""
    kind = model.get("curve", "constant")
    if kind == "constant":
        if "xi0" not in model:
            raise ConfigError("constant curve needs key 'xi0'")
        level = model["xi0"]
    try:
        if kind == "constant":
            return ConstantCurve(level)
        if kind == "pwc":
            if "pillars" not in model or "levels" not in model:
                raise ConfigError("pwc curve needs keys 'pillars' and 'levels'")
            return PiecewiseConstantCurve(model["pillars"], model["levels"])
        if kind in ("ns", "ns_nn"):
            for key in ("beta0", "beta1", "beta2", "tau_ns"):
                if key not in model:
                    raise ConfigError(f"{kind} curve needs key {key!r}")
            ns = NelsonSiegelCurve(model["beta0"], model["beta1"], model["beta2"], model["tau_ns"])
            if kind == "ns":
                return ns
            if "weights_file" not in model:
                raise ConfigError("ns_nn curve needs key 'weights_file'")
            weights = read_nn_weights(model["weights_file"])
            return NelsonSiegelNNCurve(ns, model.get("kappa", 0.01), weights)
    except DomainError as exc:
        raise ConfigError(f"invalid curve parameters: {exc}") from exc
    raise ConfigError(f"unknown curve kind {kind!r}")


def build_model(cfg: dict) -> ModelParams:
    """ModelParams from the [model] section."""
    model = cfg.get("model")
    if model is None:
        raise ConfigError("missing config section [model]")
    for key in ("hurst", "rho", "eta"):
        if key not in model:
            raise ConfigError(f"missing key {key!r} in section [model]")
    try:
        return ModelParams(
            xi0=build_curve(model),
            hurst=model["hurst"],
            rho=model["rho"],
            eta=model["eta"],
            s0=model.get("s0", 1.0),
            r=model.get("r", 0.0),
        )
    except DomainError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def build_schedule(cfg: dict) -> GridSchedule:
    """GridSchedule from the [grid] section (either 'n' or 'tau')."""
    grid = cfg.get("grid")
    if grid is None:
        raise ConfigError("missing config section [grid]")
    maturities = grid.get("maturities")
    if not maturities:
        raise ConfigError("missing key 'maturities' in section [grid]")
    try:
        if "tau" in grid:
            if "n" in grid:
                raise ConfigError("give either 'n' or 'tau' in [grid], not both")
            return GridSchedule.from_step(grid["tau"], maturities)
        if "n" in grid:
            return GridSchedule.from_horizon(grid["n"], maturities[-1], maturities)
    except DomainError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc
    raise ConfigError("section [grid] needs 'n' or 'tau'")
