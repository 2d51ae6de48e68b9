"""Batch command-line front end.

Subcommands: gen-nodes, smile, surface, calibrate, barrier, landscape.
Every command is a pure function of (config file, CLI overrides): rerunning
with the same inputs produces byte-identical outputs.  Exit codes: 0 success,
2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np
import scipy

from . import __version__
from .blackscholes import max_rel_error, smile_from_batch, write_smile
from .calibration import (
    CalibConfig,
    absolute_percentage_errors,
    calibrate,
    landscape,
    prices_from_samples,
    summary_text,
    write_landscape,
    write_trajectory,
)
from .config import build_model, build_schedule, load_config, require
from .curves import ConstantCurve
from .errors import (
    ConfigError,
    DomainError,
    FactorizationError,
    InversionError,
    KernelError,
    ParseError,
    RoughcalError,
    SimulationError,
)
from .kernels import generate_soe, sup_error, write_soe
from .paths import DEFAULT_CHUNK, ModelParams, simulate_paths
from .pricing import Contract, price_barrier, price_european
from .wasserstein import read_market_samples

#: Environment variable providing the default worker-thread count.
THREADS_ENV = "ROUGHCAL_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_manifest(out_dir: str, command: str, config_path, seed, threads) -> None:
    digest = "none"
    if config_path and os.path.exists(config_path):
        with open(config_path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write(f"command: {command}\n")
        fh.write(f"config: {config_path or 'none'}\n")
        fh.write(f"config_sha256: {digest}\n")
        fh.write(f"seed: {seed}\n")
        fh.write(f"threads: {threads}\n")
        fh.write(f"roughcal_version: {__version__}\n")
        fh.write(f"numpy_version: {np.__version__}\n")
        fh.write(f"scipy_version: {scipy.__version__}\n")


def _run_settings(cfg: dict, args):
    run = cfg.get("run", {})
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    if args.threads is not None:
        threads = args.threads
    elif THREADS_ENV in os.environ:
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer")
    else:
        threads = run.get("threads", 1)
    m = run.get("m")
    if m is not None and m < 1:
        raise ConfigError("run.m must be a positive path count")
    return seed, threads, run


def cmd_gen_nodes(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    section = cfg.get("gen_nodes", {})
    hurst = args.hurst if args.hurst is not None else section.get("hurst")
    delta = args.delta if args.delta is not None else section.get("delta")
    horizon = args.horizon if args.horizon is not None else section.get("horizon")
    eps = args.eps if args.eps is not None else section.get("eps")
    for name, val in (("hurst", hurst), ("delta", delta), ("horizon", horizon), ("eps", eps)):
        if val is None:
            raise ConfigError(f"gen-nodes needs {name!r} (flag or [gen_nodes] key)")
    if not delta < horizon:
        raise ConfigError("delta must be smaller than horizon")
    soe = generate_soe(hurst, delta, horizon, eps)
    err = sup_error(soe, hurst, delta, horizon)
    out = os.path.join(args.out_dir, "nodes.csv")
    write_soe(out, soe)
    _write_manifest(args.out_dir, "gen-nodes", args.config, "none", "none")
    print(f"N: {soe.n_terms}")
    print(f"sup_error: {err:.6g}")
    print(f"wrote: {out}")
    return EXIT_OK


def _simulate_for(cfg, args, schedule, params, scheme, m, seed, threads, run):
    eps = run.get("eps", 1e-3)
    soe = None
    if scheme in ("msoe", "soe"):
        soe = generate_soe(params.hurst, schedule.tau, schedule.maturities[-1], eps)
    return simulate_paths(
        params, schedule, soe, scheme, m, seed=seed, threads=threads,
        chunk_size=run.get("chunk_size", DEFAULT_CHUNK),
    )


def cmd_smile(args) -> int:
    cfg = load_config(args.config)
    params = build_model(cfg)
    schedule = build_schedule(cfg)
    seed, threads, run = _run_settings(cfg, args)
    m = require(cfg, "run", "m")
    scheme = run.get("scheme", "msoe")
    log_strikes = require(cfg, "smile", "log_strikes")
    benchmark = cfg.get("smile", {}).get("benchmark")

    schemes = [scheme] + ([benchmark] if benchmark else [])
    results = {}
    for sc in schemes:
        batch = _simulate_for(cfg, args, schedule, params, sc, m, seed, threads, run)
        points = []
        for t in schedule.maturities:
            points.extend(smile_from_batch(batch, float(t), log_strikes, params.s0, params.r))
        results[sc] = points
        write_smile(os.path.join(args.out_dir, f"smile_{sc}.csv"), points)
    if benchmark:
        err = max_rel_error(results[scheme], results[benchmark])
        with open(os.path.join(args.out_dir, "smile_summary.csv"), "w") as fh:
            fh.write("scheme,benchmark,max_rel_error\n")
            fh.write(f"{scheme},{benchmark},{err:.17g}\n")
        print(f"max_rel_error: {err:.6g}")
    _write_manifest(args.out_dir, "smile", args.config, seed, threads)
    return EXIT_OK


def cmd_surface(args) -> int:
    cfg = load_config(args.config)
    params = build_model(cfg)
    seed, threads, run = _run_settings(cfg, args)
    m = require(cfg, "run", "m")
    scheme = run.get("scheme", "msoe")
    sec = cfg.get("surface", {})
    maturities = require(cfg, "surface", "maturities")
    k_min, k_max, k_count = require(cfg, "surface", "k_min", "k_max", "k_count")
    scale = sec.get("scale_by_sqrt_t", True)
    benchmark = sec.get("benchmark")

    grid = cfg.get("grid", {})
    if "n" not in grid and "tau" not in grid:
        raise ConfigError("section [grid] needs 'n' or 'tau'")
    from .paths import GridSchedule

    if "tau" in grid:
        schedule = GridSchedule.from_step(grid["tau"], maturities)
    else:
        schedule = GridSchedule.from_horizon(grid["n"], maturities[-1], maturities)

    schemes = [scheme] + ([benchmark] if benchmark else [])
    results = {}
    for sc in schemes:
        batch = _simulate_for(cfg, args, schedule, params, sc, m, seed, threads, run)
        points = []
        for t in schedule.maturities:
            ks = np.linspace(k_min, k_max, k_count)
            if scale:
                ks = ks * np.sqrt(t)
            points.extend(smile_from_batch(batch, float(t), ks, params.s0, params.r))
        results[sc] = points
        write_smile(os.path.join(args.out_dir, f"surface_{sc}.csv"), points)
    if benchmark:
        err = max_rel_error(results[scheme], results[benchmark])
        with open(os.path.join(args.out_dir, "surface_summary.csv"), "w") as fh:
            fh.write("scheme,benchmark,max_rel_error\n")
            fh.write(f"{scheme},{benchmark},{err:.17g}\n")
        print(f"max_rel_error: {err:.6g}")
    _write_manifest(args.out_dir, "surface", args.config, seed, threads)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    init = build_model(cfg)
    schedule = build_schedule(cfg)
    seed, threads, run = _run_settings(cfg, args)
    m = require(cfg, "run", "m")
    sec = cfg.get("calibrate", {})
    loss = sec.get("loss", "w1")
    market_file = require(cfg, "calibrate", "market_file")
    if not os.path.exists(market_file):
        raise ConfigError(f"market file not found: {market_file}")
    samples = read_market_samples(market_file)

    kwargs = dict(
        schedule=schedule, m=m, loss=loss, seed=seed,
        kernel_eps=sec.get("kernel_eps", run.get("eps", 1e-3)),
        max_iters=sec.get("max_iters", 5000),
        fd_step=sec.get("fd_step", 1e-3),
        space=sec.get("space", "constrained"),
        calibrate_scalars=sec.get("calibrate_scalars", True),
        regen_threshold=sec.get("regen_threshold", 1e-4),
        chunk_size=run.get("chunk_size", DEFAULT_CHUNK),
        r=init.r, s0=init.s0,
    )
    for key in ("eps_stop", "patience", "delta_min"):
        if key in sec:
            kwargs[key] = sec[key]
    if loss == "w1":
        kwargs["market_samples"] = samples
    else:
        strikes = require(cfg, "calibrate", "strikes")
        contracts = tuple(
            Contract("call", k, float(t))
            for t in schedule.maturities
            for k in strikes
        )
        kwargs["contracts"] = contracts
        kwargs["market_prices"] = prices_from_samples(samples, contracts, init.r)
    calib_cfg = CalibConfig(**kwargs)

    truth = None
    if "truth" in cfg:
        t = cfg["truth"]
        truth = ModelParams(
            xi0=ConstantCurve(t["xi0"]), hurst=t["hurst"], rho=t["rho"], eta=t["eta"],
            s0=init.s0, r=init.r,
        )
    run_result = calibrate(calib_cfg, init, truth)
    write_trajectory(os.path.join(args.out_dir, "trajectory.csv"), run_result)
    text = summary_text(run_result, truth)
    with open(os.path.join(args.out_dir, "summary.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    _write_manifest(args.out_dir, "calibrate", args.config, seed, threads)
    return EXIT_OK


def cmd_barrier(args) -> int:
    cfg = load_config(args.config)
    params = build_model(cfg)
    schedule = build_schedule(cfg)
    seed, threads, run = _run_settings(cfg, args)
    m = require(cfg, "run", "m")
    scheme = run.get("scheme", "msoe")
    sec = cfg.get("barrier", {})
    kinds = [k.strip() for k in sec.get("kinds", "dop,uoc").split(",") if k.strip()]
    for k in kinds:
        if k not in ("dop", "uoc"):
            raise ConfigError(f"barrier kinds must be 'dop' and/or 'uoc', got {k!r}")

    batch = _simulate_for(cfg, args, schedule, params, scheme, m, seed, threads, run)
    rows = []
    for t in schedule.maturities:
        for k in kinds:
            if k == "dop":
                strike = sec.get("dop_strike", 0.95)
                barriers = sec.get("dop_barriers", list(np.arange(70, 86) / 100.0))
                kind = "down-and-out-put"
            else:
                strike = sec.get("uoc_strike", 1.05)
                barriers = sec.get("uoc_barriers", list(np.arange(115, 131) / 100.0))
                kind = "up-and-out-call"
            for b in barriers:
                est = price_barrier(batch, Contract(kind, strike, float(t), b), params.r)
                rows.append((kind, float(t), strike, b, est.mean, est.stderr))
            # Vanilla reference at the same strike for sanity comparisons.
            van = price_european(batch, strike, float(t), params.r, "put" if k == "dop" else "call")
            rows.append((("put" if k == "dop" else "call"), float(t), strike, float("nan"), van.mean, van.stderr))
    out = os.path.join(args.out_dir, "barrier.csv")
    with open(out, "w") as fh:
        fh.write("kind,T,K,B,price,stderr\n")
        for kind, t, kk, b, mean, se in rows:
            fh.write(f"{kind},{t:.17g},{kk:.17g},{b:.17g},{mean:.17g},{se:.17g}\n")
    print(f"wrote: {out}")
    _write_manifest(args.out_dir, "barrier", args.config, seed, threads)
    return EXIT_OK


def cmd_landscape(args) -> int:
    cfg = load_config(args.config)
    truth = build_model(cfg)
    schedule = build_schedule(cfg)
    seed, threads, run = _run_settings(cfg, args)
    m = require(cfg, "run", "m")
    sec = cfg.get("landscape", {})
    params_key = require(cfg, "landscape", "params")
    names = [p.strip() for p in params_key.split(",")]
    if len(names) != 2:
        raise ConfigError("landscape params must name exactly two parameters")
    r1, r2 = require(cfg, "landscape", "range1", "range2")
    if len(r1) != 2 or len(r2) != 2:
        raise ConfigError("landscape ranges must be 'lo,hi' pairs")
    grid = sec.get("grid", 25)
    loss = sec.get("loss", "w1")

    # Market data is synthesized internally; CalibConfig still validates a
    # market block, so pass placeholder samples of the right size.
    placeholder = {float(t): np.ones(m) for t in schedule.maturities}
    calib_cfg = CalibConfig(
        schedule=schedule, m=m, loss="w1", market_samples=placeholder,
        kernel_eps=run.get("eps", 1e-3), seed=seed,
        chunk_size=run.get("chunk_size", DEFAULT_CHUNK), r=truth.r, s0=truth.s0,
    )
    if loss != "w1":
        raise ConfigError("landscape command currently sweeps the w1 loss")
    result = landscape(truth, calib_cfg, tuple(names), (tuple(r1), tuple(r2)), grid=grid)
    out = os.path.join(args.out_dir, "landscape.csv")
    write_landscape(out, result)
    print(f"wrote: {out}")
    _write_manifest(args.out_dir, "landscape", args.config, seed, threads)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughcal",
        description="Rough Bergomi Monte Carlo engine and W1 calibration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to the run configuration file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--threads", type=int, help="worker thread count override")
        p.add_argument("--out-dir", default=".", help="output directory")

    g = sub.add_parser("gen-nodes", help="generate certified kernel nodes/weights")
    common(g)
    g.add_argument("--hurst", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--horizon", type=float)
    g.add_argument("--eps", type=float)
    g.set_defaults(func=cmd_gen_nodes)

    for name, func, help_text in (
        ("smile", cmd_smile, "implied-vol smile study"),
        ("surface", cmd_surface, "implied-vol surface study"),
        ("calibrate", cmd_calibrate, "run the calibration loop"),
        ("barrier", cmd_barrier, "price the barrier option grid"),
        ("landscape", cmd_landscape, "loss landscape over a parameter pair"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "gen-nodes" and not args.config:
        print("error: --config is required for this command", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        return args.func(args)
    except (ConfigError, ParseError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KernelError, SimulationError, FactorizationError, InversionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RoughcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
