"""Distribution-matching calibration of the rough Bergomi model.

Each iteration simulates terminal-price samples at every quoted maturity
under the current parameters, measures the Wasserstein-1 distance (or MSE of
prices) against the market, estimates the gradient by central finite
differences with common random numbers, and updates the parameters with Adam
under a piecewise-constant learning rate.  The kernel approximation is
regenerated whenever H has moved materially.

The per-iteration noise is frozen: all finite-difference probes of one
iteration reuse the same Gaussian draws, and a fresh seed is derived
deterministically from (master seed, iteration) so two runs with the same
configuration produce identical trajectories.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .curves import (
    ConstantCurve,
    NelsonSiegelCurve,
    NelsonSiegelNNCurve,
    PiecewiseConstantCurve,
    _constrain_theta,
    _unconstrain_theta,
    constrain,
    unconstrain,
)
from .errors import DomainError, SimulationError
from .kernels import generate_soe
from .paths import (
    DEFAULT_CHUNK,
    FrozenNoiseSimulator,
    GridSchedule,
    ModelParams,
    simulate_paths,
)
from .pricing import Contract, price_european
from .rng import derive_seed
from .wasserstein import mse_loss, w1_loss

#: Finite penalty returned when a probe makes the forward-variance curve
#: non-positive; keeps finite differences defined while pushing back inside.
_CURVE_PENALTY = 1e3

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8

_STOP_DEFAULTS = {
    "w1": {"eps_stop": 1e-4, "patience": 80, "delta_min": 1e-5},
    "mse": {"eps_stop": 1e-8, "patience": 40, "delta_min": 1e-9},
}


def lr_schedule(kind: str, iteration: int) -> float:
    """Piecewise-constant learning rate; ``iteration`` counts from 1."""
    if iteration < 0:
        raise DomainError("iteration must be non-negative")
    if kind == "w1":
        return 0.001 if iteration <= 800 else 0.0002
    if kind == "mse":
        return 0.003 if iteration <= 20 else 0.001
    raise DomainError(f"unknown learning-rate schedule {kind!r}")


@dataclass(frozen=True)
class AdamState:
    """Adam moment estimates; ``step`` counts completed updates."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, dim: int) -> "AdamState":
        return cls(m=np.zeros(dim), v=np.zeros(dim), step=0)


def adam_step(state: AdamState, params: np.ndarray, gradient: np.ndarray, rate: float):
    """One bias-corrected Adam update; returns (new params, new state)."""
    gradient = np.asarray(gradient, dtype=float)
    if gradient.shape != state.m.shape or gradient.shape != np.shape(params):
        raise DomainError("gradient dimension does not match the Adam state")
    if not np.all(np.isfinite(gradient)):
        raise DomainError("non-finite gradient")
    t = state.step + 1
    m = _ADAM_BETA1 * state.m + (1.0 - _ADAM_BETA1) * gradient
    v = _ADAM_BETA2 * state.v + (1.0 - _ADAM_BETA2) * gradient**2
    m_hat = m / (1.0 - _ADAM_BETA1**t)
    v_hat = v / (1.0 - _ADAM_BETA2**t)
    new_params = params - rate * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
    return new_params, AdamState(m=m, v=v, step=t)


def fd_gradient(loss_fn, u: np.ndarray, steps) -> np.ndarray:
    """Central finite differences (L(u+h e_i) - L(u-h e_i)) / (2h).

    ``loss_fn`` must evaluate every probe under common random numbers.
    """
    u = np.asarray(u, dtype=float)
    h = np.broadcast_to(np.asarray(steps, dtype=float), u.shape)
    if np.any(h <= 0.0):
        raise DomainError("finite-difference steps must be positive")
    grad = np.empty_like(u)
    for i in range(u.size):
        up = u.copy()
        up[i] += h[i]
        dn = u.copy()
        dn[i] -= h[i]
        lp, lm = loss_fn(up), loss_fn(dn)
        if not (np.isfinite(lp) and np.isfinite(lm)):
            raise SimulationError(f"non-finite loss when probing component {i}")
        grad[i] = (lp - lm) / (2.0 * h[i])
    return grad


def check_stop(history, eps_stop: float, patience: int, delta_min: float, max_iters: int):
    """Stopping decision from the loss history; None means continue.

    Returns "tolerance" when the last loss is within eps_stop, "patience"
    when the best loss has not improved by at least delta_min for ``patience``
    consecutive iterations, "max-iters" at the iteration cap.
    """
    history = list(history)
    if not history:
        raise DomainError("loss history must be non-empty")
    if history[-1] <= eps_stop:
        return "tolerance"
    best = history[0]
    since_best = 0
    for loss in history[1:]:
        if loss <= best - delta_min:
            best = loss
            since_best = 0
        else:
            since_best += 1
    if since_best >= patience:
        return "patience"
    if len(history) >= max_iters:
        return "max-iters"
    return None


@dataclass(frozen=True)
class CalibConfig:
    """Inputs of a calibration run (market data, budgets, stopping rules)."""

    schedule: GridSchedule
    m: int
    loss: str = "w1"
    market_samples: dict | None = None
    contracts: tuple = ()
    market_prices: np.ndarray | None = None
    kernel_eps: float = 1e-3
    eps_stop: float | None = None
    patience: int | None = None
    delta_min: float | None = None
    max_iters: int = 5000
    lr_kind: str | None = None
    seed: int = 0
    fd_step: float = 1e-3
    space: str = "constrained"
    calibrate_scalars: bool = True
    regen_threshold: float = 1e-4
    chunk_size: int = DEFAULT_CHUNK
    r: float = 0.0
    s0: float = 1.0

    def __post_init__(self):
        if self.loss not in ("w1", "mse"):
            raise DomainError(f"loss must be 'w1' or 'mse', got {self.loss!r}")
        if self.m < 2:
            raise DomainError("batch size m must be at least 2")
        if self.max_iters < 1:
            raise DomainError("max_iters must be positive")
        if self.space not in ("constrained", "unconstrained"):
            raise DomainError("space must be 'constrained' or 'unconstrained'")
        defaults = _STOP_DEFAULTS[self.loss]
        for name in ("eps_stop", "patience", "delta_min"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, defaults[name])
        if self.lr_kind is None:
            object.__setattr__(self, "lr_kind", self.loss)
        if self.eps_stop < 0.0:
            raise DomainError("eps_stop must be non-negative")
        if self.patience < 1:
            raise DomainError("patience must be at least 1")
        if self.delta_min <= 0.0:
            raise DomainError("delta_min must be positive")
        if self.loss == "w1":
            if self.market_samples is None:
                raise DomainError("w1 loss needs market samples")
            mats = sorted(self.market_samples)
            if not np.allclose(mats, self.schedule.maturities):
                raise DomainError("market maturities must match the grid schedule")
            for t, vals in self.market_samples.items():
                if np.asarray(vals).size != self.m:
                    raise DomainError(
                        f"market sample size at T={t:g} must equal m={self.m}"
                    )
        else:
            if not self.contracts or self.market_prices is None:
                raise DomainError("mse loss needs contracts and market prices")
            if len(self.contracts) != np.asarray(self.market_prices).size:
                raise DomainError("one market price per contract required")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    loss: float
    lr: float
    n_terms: int
    params: np.ndarray
    elapsed: float


@dataclass(frozen=True)
class CalibRun:
    """Trajectory and outcome of one calibration run."""

    records: tuple
    stop_reason: str
    final_params: ModelParams
    param_names: tuple

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def iterations(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# Parameter vector packing.

def _theta_names(curve) -> list:
    if isinstance(curve, ConstantCurve):
        return ["xi0"]
    if isinstance(curve, PiecewiseConstantCurve):
        return [f"theta{l + 1}" for l in range(curve.levels.size)]
    if isinstance(curve, NelsonSiegelCurve):
        return ["beta0", "beta1", "beta2", "tau_ns"]
    if isinstance(curve, NelsonSiegelNNCurve):
        return ["beta0", "beta1", "beta2", "tau_ns", "kappa"] + [
            f"w{i + 1}" for i in range(curve.weights.size)
        ]
    raise DomainError(f"unsupported curve type {type(curve).__name__}")


def _clip_theta(curve, theta: np.ndarray) -> np.ndarray:
    theta = theta.copy()
    if isinstance(curve, (ConstantCurve, PiecewiseConstantCurve)):
        return np.maximum(theta, 1e-8)
    if isinstance(curve, (NelsonSiegelCurve, NelsonSiegelNNCurve)):
        theta[0] = max(theta[0], 1e-8)
        theta[3] = max(theta[3], 1e-3)
        return theta
    raise DomainError(f"unsupported curve type {type(curve).__name__}")


class _ParamSpace:
    """Maps between the optimizer vector and ModelParams."""

    def __init__(self, init: ModelParams, space: str, with_scalars: bool):
        self.template = init.xi0
        self.space = space
        self.with_scalars = with_scalars
        self.fixed = (init.hurst, init.rho, init.eta)
        self.s0, self.r = init.s0, init.r
        names = _theta_names(self.template)
        self.names = tuple((["H", "rho", "eta"] if with_scalars else []) + names)

    def pack(self, params: ModelParams) -> np.ndarray:
        theta = params.xi0.theta
        if self.space == "constrained":
            head = [params.hurst, params.rho, params.eta] if self.with_scalars else []
            return np.concatenate([head, theta])
        if self.with_scalars:
            return unconstrain(params.hurst, params.rho, params.eta, params.xi0, theta)
        return _unconstrain_theta(params.xi0, theta)

    def unpack(self, x: np.ndarray) -> ModelParams:
        x = np.asarray(x, dtype=float)
        if self.space == "constrained":
            if self.with_scalars:
                h, rho, eta = x[0], x[1], x[2]
                theta = x[3:]
            else:
                h, rho, eta = self.fixed
                theta = x
        else:
            if self.with_scalars:
                h, rho, eta, theta = constrain(x, self.template)
            else:
                h, rho, eta = self.fixed
                theta = _constrain_theta(self.template, x)
        return ModelParams(
            xi0=self.template.with_theta(theta), hurst=float(h), rho=float(rho),
            eta=float(eta), s0=self.s0, r=self.r,
        )

    def clip(self, x: np.ndarray) -> np.ndarray:
        """Project a constrained-space vector back into the legal box."""
        if self.space != "constrained":
            return x
        x = x.copy()
        k = 0
        if self.with_scalars:
            x[0] = np.clip(x[0], 1e-3, 0.4999)
            x[1] = np.clip(x[1], -0.9999, 0.0)
            x[2] = max(x[2], 1e-6)
            k = 3
        x[k:] = _clip_theta(self.template, x[k:])
        return x

    def constrained_values(self, x: np.ndarray) -> np.ndarray:
        """Human-readable (constrained) values for trajectory records."""
        p = self.unpack(x)
        head = [p.hurst, p.rho, p.eta] if self.with_scalars else []
        return np.concatenate([head, p.xi0.theta])


def _model_prices(terminals: np.ndarray, contracts, schedule: GridSchedule, r: float) -> np.ndarray:
    mats = schedule.maturities
    out = np.empty(len(contracts))
    for j, c in enumerate(contracts):
        idx = np.nonzero(np.isclose(mats, c.maturity))[0]
        if idx.size == 0:
            raise DomainError(f"contract maturity {c.maturity:g} not on the grid")
        st = terminals[int(idx[0])]
        if c.kind == "call":
            payoff = np.maximum(st - c.strike, 0.0)
        elif c.kind == "put":
            payoff = np.maximum(c.strike - st, 0.0)
        else:
            raise DomainError("mse calibration supports vanilla contracts only")
        out[j] = np.exp(-r * c.maturity) * payoff.mean()
    return out


def prices_from_samples(samples: dict, contracts, r: float) -> np.ndarray:
    """Market prices implied by per-maturity terminal samples."""
    out = np.empty(len(contracts))
    for j, c in enumerate(contracts):
        match = [t for t in samples if np.isclose(t, c.maturity)]
        if not match:
            raise DomainError(f"no market samples at maturity {c.maturity:g}")
        st = np.asarray(samples[match[0]], dtype=float)
        payoff = np.maximum(st - c.strike, 0.0) if c.kind == "call" else np.maximum(c.strike - st, 0.0)
        out[j] = np.exp(-r * c.maturity) * payoff.mean()
    return out


def synthesize_market(
    params: ModelParams,
    schedule: GridSchedule,
    m: int,
    kernel_eps: float,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK,
) -> dict:
    """Per-maturity terminal samples from ground-truth parameters (mSOE)."""
    soe = generate_soe(params.hurst, schedule.tau, schedule.maturities[-1], kernel_eps)
    batch = simulate_paths(
        params, schedule, soe, "msoe", m, seed=seed, chunk_size=chunk_size
    )
    return {float(t): batch.terminals[j] for j, t in enumerate(schedule.maturities)}


def _make_loss(cfg: CalibConfig, frozen: FrozenNoiseSimulator, space: _ParamSpace):
    mats = [float(t) for t in cfg.schedule.maturities]
    if cfg.loss == "w1":
        market = {float(t): np.asarray(v, dtype=float) for t, v in cfg.market_samples.items()}
    else:
        market = np.asarray(cfg.market_prices, dtype=float)

    def loss_fn(x):
        try:
            params = space.unpack(x)
        except DomainError:
            return _CURVE_PENALTY
        try:
            terminals = frozen.terminals(params)
        except DomainError:
            # Curve went non-positive on the grid: finite penalty scaled by
            # the violation so finite differences point back inside.
            xi = np.asarray(params.xi0(cfg.schedule.times), dtype=float)
            return _CURVE_PENALTY * (1.0 + float(np.maximum(-xi, 0.0).max()))
        if cfg.loss == "w1":
            model = {t: terminals[j] for j, t in enumerate(mats)}
            return w1_loss(model, market)
        return mse_loss(_model_prices(terminals, cfg.contracts, cfg.schedule, cfg.r), market)

    return loss_fn


def calibrate(cfg: CalibConfig, init: ModelParams, truth: ModelParams | None = None) -> CalibRun:
    """Run the calibration loop; see the module docstring for the scheme."""
    space = _ParamSpace(init, cfg.space, cfg.calibrate_scalars)
    x = space.pack(init)
    adam = AdamState.zeros(x.size)
    frozen = FrozenNoiseSimulator(cfg.schedule, cfg.m, cfg.chunk_size)
    horizon = cfg.schedule.maturities[-1]

    soe = None
    h_at_gen = None
    records = []
    history = []
    stop_reason = "max-iters"
    for it in range(1, cfg.max_iters + 1):
        tic = time.perf_counter()
        params = space.unpack(x)
        if soe is None or abs(params.hurst - h_at_gen) > cfg.regen_threshold:
            soe = generate_soe(params.hurst, cfg.schedule.tau, horizon, cfg.kernel_eps)
            h_at_gen = params.hurst
        seed_i = derive_seed(cfg.seed, it)
        frozen.load_noise(soe, seed_i)
        loss_fn = _make_loss(cfg, frozen, space)
        try:
            loss = loss_fn(x)
            if not np.isfinite(loss):
                raise SimulationError("non-finite loss")
            history.append(float(loss))
            reason = check_stop(history, cfg.eps_stop, cfg.patience, cfg.delta_min, cfg.max_iters)
            lr = lr_schedule(cfg.lr_kind, it)
            records.append(
                IterationRecord(
                    iteration=it, loss=float(loss), lr=lr, n_terms=soe.n_terms,
                    params=space.constrained_values(x), elapsed=time.perf_counter() - tic,
                )
            )
            if reason is not None:
                stop_reason = reason
                break
            grad = fd_gradient(loss_fn, x, cfg.fd_step)
            x, adam = adam_step(adam, x, grad, lr)
            x = space.clip(x)
        except (SimulationError, DomainError) as exc:
            raise SimulationError(f"iteration {it}: {exc}") from exc

    return CalibRun(
        records=tuple(records),
        stop_reason=stop_reason,
        final_params=space.unpack(x),
        param_names=space.names,
    )


def write_trajectory(path, run: CalibRun) -> None:
    """Write the calibration trajectory as CSV "iter,loss,lr,N,<params>"."""
    with open(path, "w") as fh:
        fh.write("iter,loss,lr,N," + ",".join(run.param_names) + "\n")
        for rec in run.records:
            vals = ",".join(f"{v:.17g}" for v in rec.params)
            fh.write(f"{rec.iteration},{rec.loss:.17g},{rec.lr:.17g},{rec.n_terms},{vals}\n")


def absolute_percentage_errors(run: CalibRun, truth: ModelParams) -> dict:
    """Per-parameter |calibrated - true| / |true| for the scalar setup."""
    p = run.final_params
    out = {}
    pairs = {}
    if "H" in run.param_names:
        pairs.update({"H": (p.hurst, truth.hurst), "rho": (p.rho, truth.rho), "eta": (p.eta, truth.eta)})
    cal_theta, true_theta = p.xi0.theta, truth.xi0.theta
    theta_names = _theta_names(p.xi0)
    for name, a, b in zip(theta_names, cal_theta, true_theta):
        pairs[name] = (a, b)
    for name, (a, b) in pairs.items():
        out[name] = abs(a - b) / abs(b) if b != 0 else np.inf
    return out


def summary_text(run: CalibRun, truth: ModelParams | None = None) -> str:
    """Key-value text summary of a calibration run."""
    lines = [
        f"stop_reason: {run.stop_reason}",
        f"iterations: {run.iterations}",
        f"final_loss: {run.records[-1].loss:.8g}",
    ]
    final = run.records[-1].params
    for name, v in zip(run.param_names, final):
        lines.append(f"{name}: {v:.8g}")
    if truth is not None:
        for name, a in absolute_percentage_errors(run, truth).items():
            lines.append(f"ape_{name}: {a:.6g}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LandscapeResult:
    """Loss values over a 2-d parameter grid; NaN marks failed cells."""

    param_names: tuple
    x_values: np.ndarray
    y_values: np.ndarray
    losses: np.ndarray
    loss_kind: str


def _with_scalar(params: ModelParams, name: str, value: float) -> ModelParams:
    if name == "xi0":
        if not isinstance(params.xi0, ConstantCurve):
            raise DomainError("landscape over xi0 requires a constant curve")
        return replace(params, xi0=ConstantCurve(float(value)))
    if name in ("hurst", "H"):
        return replace(params, hurst=float(value))
    if name == "rho":
        return replace(params, rho=float(value))
    if name == "eta":
        return replace(params, eta=float(value))
    raise DomainError(f"unknown landscape parameter {name!r}")


def landscape(
    truth: ModelParams,
    cfg: CalibConfig,
    param_pair: tuple,
    ranges: tuple,
    grid: int = 25,
) -> LandscapeResult:
    """Loss over a grid x grid sweep of two scalar parameters.

    The market is synthesized from ``truth`` and every cell is evaluated with
    the same simulation seed, so the truth cell's loss is exactly zero and
    sampling noise cancels across cells.  Cells that fail to simulate are
    recorded as NaN.
    """
    if grid < 2:
        raise DomainError("grid must be at least 2")
    (name_x, name_y) = param_pair
    for name in (name_x, name_y):
        if name not in ("xi0", "hurst", "H", "rho", "eta"):
            raise DomainError(f"unknown landscape parameter {name!r}")
    (lo_x, hi_x), (lo_y, hi_y) = ranges
    xs = np.linspace(lo_x, hi_x, grid)
    ys = np.linspace(lo_y, hi_y, grid)
    seed = derive_seed(cfg.seed, "landscape")
    market = synthesize_market(truth, cfg.schedule, cfg.m, cfg.kernel_eps, seed, cfg.chunk_size)
    if cfg.loss == "mse":
        market_prices = prices_from_samples(market, cfg.contracts, cfg.r)
    horizon = cfg.schedule.maturities[-1]
    mats = [float(t) for t in cfg.schedule.maturities]
    soe_cache = {}
    losses = np.full((grid, grid), np.nan)
    for i, vx in enumerate(xs):
        for j, vy in enumerate(ys):
            try:
                p = _with_scalar(_with_scalar(truth, name_x, vx), name_y, vy)
                soe = soe_cache.get(p.hurst)
                if soe is None:
                    soe = generate_soe(p.hurst, cfg.schedule.tau, horizon, cfg.kernel_eps)
                    soe_cache[p.hurst] = soe
                batch = simulate_paths(
                    p, cfg.schedule, soe, "msoe", cfg.m, seed=seed, chunk_size=cfg.chunk_size
                )
                if cfg.loss == "w1":
                    model = {t: batch.terminals[k] for k, t in enumerate(mats)}
                    losses[i, j] = w1_loss(model, market)
                else:
                    losses[i, j] = mse_loss(
                        _model_prices(batch.terminals, cfg.contracts, cfg.schedule, cfg.r),
                        market_prices,
                    )
            except (SimulationError, DomainError):
                losses[i, j] = np.nan
    return LandscapeResult(
        param_names=tuple(param_pair), x_values=xs, y_values=ys,
        losses=losses, loss_kind=cfg.loss,
    )


def write_landscape(path, result: LandscapeResult) -> None:
    """Write landscape cells as CSV "<p1>,<p2>,loss,log10_loss"."""
    with open(path, "w") as fh:
        fh.write(f"{result.param_names[0]},{result.param_names[1]},loss,log10_loss\n")
        for i, vx in enumerate(result.x_values):
            for j, vy in enumerate(result.y_values):
                loss = result.losses[i, j]
                if np.isfinite(loss):
                    log10 = np.log10(max(loss, 1e-300))
                    fh.write(f"{vx:.17g},{vy:.17g},{loss:.17g},{log10:.17g}\n")
                else:
                    fh.write(f"{vx:.17g},{vy:.17g},nan,nan\n")
