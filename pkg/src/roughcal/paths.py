"""Monte Carlo simulation of rough Bergomi (S, V) paths on a uniform grid.

Three schemes are provided: the hybrid scheme that combines a sum of
exponentials for the historical part of the Volterra process with an exact
draw of its local part ("msoe"), the pure sum-of-exponentials baseline
("soe"), and the exact joint-Gaussian benchmark via a full Cholesky
factorization of the Volterra/Brownian covariance ("cholesky").

Reproducibility contract: a run is determined by (params, schedule, soe,
scheme, m, seed, chunk_size).  Paths are simulated in fixed chunks, each chunk
drawing from its own Philox stream, so the output is bit-identical regardless
of how many worker threads execute the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import StepCovariance, build_covariance
from .curves import ConstantCurve
from .errors import DomainError, SimulationError
from .kernels import SoeApprox
from .rng import RngStream

#: Paths per chunk; part of the reproducibility contract.
DEFAULT_CHUNK = 8192

#: Largest step count accepted by the Cholesky scheme (O(n^3) setup).
CHOLESKY_MAX_STEPS = 512

#: Natural-log exponent above which a variance draw is treated as overflow.
OVERFLOW_EXPONENT = 700.0

_SCHEMES = ("msoe", "soe", "cholesky")


@dataclass(frozen=True)
class ModelParams:
    """Rough Bergomi parameters (xi0, H, rho, eta) plus spot and rate."""

    xi0: object
    hurst: float
    rho: float
    eta: float
    s0: float = 1.0
    r: float = 0.0

    def __post_init__(self):
        if isinstance(self.xi0, (int, float)):
            object.__setattr__(self, "xi0", ConstantCurve(float(self.xi0)))
        if not callable(self.xi0):
            raise DomainError("xi0 must be a forward-variance curve or a positive number")
        if not 0.0 < self.hurst < 0.5:
            raise DomainError(f"hurst must lie in (0, 1/2), got {self.hurst}")
        if not -1.0 < self.rho <= 0.0:
            raise DomainError(f"rho must lie in (-1, 0], got {self.rho}")
        if self.eta < 0.0:
            raise DomainError(f"eta must be non-negative, got {self.eta}")
        if self.s0 <= 0.0:
            raise DomainError(f"s0 must be positive, got {self.s0}")


@dataclass(frozen=True)
class GridSchedule:
    """Uniform grid 0 = t_0 < ... < t_n with maturities on grid points."""

    n: int
    tau: float
    maturities: np.ndarray
    maturity_steps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("need at least one step")
        if self.tau <= 0.0:
            raise DomainError("step size must be positive")
        mats = np.atleast_1d(np.asarray(self.maturities, dtype=float))
        if mats.size == 0 or np.any(mats <= 0.0) or np.any(np.diff(mats) <= 0.0):
            raise DomainError("maturities must be positive and strictly increasing")
        steps = np.rint(mats / self.tau).astype(int)
        if np.any(np.abs(steps * self.tau - mats) > 1e-9 * np.maximum(1.0, mats)):
            raise DomainError("every maturity must be an exact grid point")
        if steps[-1] != self.n:
            raise DomainError("grid must end at the last maturity (tau * n = max maturity)")
        object.__setattr__(self, "maturities", mats)
        object.__setattr__(self, "maturity_steps", steps)

    @classmethod
    def from_horizon(cls, n: int, horizon: float, maturities=None) -> "GridSchedule":
        """n uniform steps over [0, horizon]."""
        if maturities is None:
            maturities = [horizon]
        return cls(n=n, tau=horizon / n, maturities=np.asarray(maturities, dtype=float))

    @classmethod
    def from_step(cls, tau: float, maturities) -> "GridSchedule":
        """Fixed step size; the grid runs to the last maturity."""
        mats = np.atleast_1d(np.asarray(maturities, dtype=float))
        return cls(n=int(round(mats[-1] / tau)), tau=tau, maturities=mats)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.tau


@dataclass(frozen=True)
class PathBatch:
    """Result of one simulation run.

    ``terminals``, ``running_min`` and ``running_max`` have shape
    (n_maturities, n_paths); extrema are over grid points up to each maturity.
    ``v_mean``/``v_var`` are cross-path moments of the discrete variance at
    every grid time.  Full trajectories are stored only when requested.
    """

    scheme: str
    maturities: np.ndarray
    terminals: np.ndarray
    running_min: np.ndarray
    running_max: np.ndarray
    seed: int
    v_mean: np.ndarray
    v_var: np.ndarray
    s_paths: np.ndarray | None = None
    v_paths: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.terminals.shape[1]


@dataclass
class VolterraState:
    """Per-path state of the approximate Volterra process.

    ``historical`` holds the N exponentially-weighted integrals of the past
    Brownian path (zero at the first step); ``local`` is the current exact
    draw of the last-window integral.
    """

    historical: np.ndarray
    local: np.ndarray


def second_moment_approx(soe: SoeApprox, hurst: float, tau: float, t_i) -> float:
    """Second moment of the hybrid Volterra approximation at grid time t_i.

    tau^(2H) + 2H sum_{k,l} w_k w_l / (l_k + l_l) * (e^(-(l_k+l_l)tau)
    - e^(-(l_k+l_l)t_i)); equals tau^(2H) exactly at the first step.
    """
    t_i = np.asarray(t_i, dtype=float)
    if np.any(t_i < tau - 1e-12 * tau):
        raise DomainError("grid time must be at least one step")
    out = np.full(t_i.shape, tau ** (2.0 * hurst))
    if soe.n_terms:
        c = soe.nodes[:, None] + soe.nodes[None, :]
        ww = soe.weights[:, None] * soe.weights[None, :]
        safe = np.where(c > 0.0, c, 1.0)
        ti = t_i.reshape(t_i.shape + (1, 1))
        bracket = np.where(
            c > 0.0, (np.exp(-safe * tau) - np.exp(-safe * ti)) / safe, ti - tau
        )
        out = out + 2.0 * hurst * np.sum(ww * bracket, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def soe_second_moment(soe: SoeApprox, hurst: float, t_i) -> float:
    """Second moment of the all-exponential Volterra approximation at t_i:
    2H sum_{k,l} w_k w_l (1 - e^(-(l_k+l_l) t_i)) / (l_k + l_l)."""
    t_i = np.asarray(t_i, dtype=float)
    if np.any(t_i < 0.0):
        raise DomainError("grid time must be non-negative")
    if soe.n_terms == 0:
        out = np.zeros(t_i.shape)
    else:
        c = soe.nodes[:, None] + soe.nodes[None, :]
        ww = soe.weights[:, None] * soe.weights[None, :]
        safe = np.where(c > 0.0, c, 1.0)
        ti = t_i.reshape(t_i.shape + (1, 1))
        bracket = np.where(c > 0.0, -np.expm1(-safe * ti) / safe, ti)
        out = 2.0 * hurst * np.sum(ww * bracket, axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


def exact_volterra_covariance(hurst: float, t_i: float, t_j: float) -> float:
    """Cov(I_ti, I_tj) = 2H int_0^min (ti-u)^(H-1/2) (tj-u)^(H-1/2) du."""
    if t_i <= 0.0 or t_j <= 0.0:
        raise DomainError("grid times must be positive")
    lo, hi = min(t_i, t_j), max(t_i, t_j)
    if lo == hi:
        # Ito isometry: Var(I_t) = t^(2H).
        return float(lo ** (2.0 * hurst))
    return float(_volterra_cov_row(hurst, lo, np.array([hi]))[0])


def _volterra_cov_row(hurst: float, t_i: float, t_js: np.ndarray) -> np.ndarray:
    """Cov(I_ti, I_tj) for t_j >= t_i, vectorized over t_j.

    Substituting u = t_i - v^(1/s) with s = H + 1/2 removes the endpoint
    singularity: the integral becomes int_0^(t_i^s) (t_j - t_i + v^(1/s))
    ^(H-1/2) / s dv with a bounded integrand; Gauss-Legendre node counts are
    doubled until successive values agree to 1e-10 relative.
    """
    s = hurst + 0.5
    upper = t_i**s
    gaps = t_js - t_i
    prev = None
    p = 64
    while p <= 8192:
        x, w = np.polynomial.legendre.leggauss(p)
        v = 0.5 * upper * (x + 1.0)
        vals = (gaps[:, None] + v[None, :] ** (1.0 / s)) ** (hurst - 0.5) / s
        est = 2.0 * hurst * 0.5 * upper * (vals @ w)
        if prev is not None and np.all(np.abs(est - prev) <= 1e-10 * np.abs(est)):
            return est
        prev = est
        p *= 2
    raise SimulationError("Volterra covariance quadrature did not converge")


def exact_cross_covariance(hurst: float, t_i: float, t_j: float) -> float:
    """Cov(I_ti, W_tj) = sqrt(2H)/(H+1/2) * [ti^(H+1/2) - (ti - min)^(H+1/2)]."""
    if t_i <= 0.0 or t_j <= 0.0:
        raise DomainError("grid times must be positive")
    s = hurst + 0.5
    m = min(t_i, t_j)
    return float(np.sqrt(2.0 * hurst) / s * (t_i**s - (t_i - m) ** s))


def _joint_cholesky_factor(hurst: float, schedule: GridSchedule) -> np.ndarray:
    """Lower Cholesky factor of Cov(I_{t1..tn}, W_{t1..tn})."""
    from .covariance import cholesky

    n = schedule.n
    t = schedule.times[1:]
    cov = np.empty((2 * n, 2 * n))
    for i in range(n):
        cov[i, i] = t[i] ** (2.0 * hurst)
        if i + 1 < n:
            row = _volterra_cov_row(hurst, t[i], t[i + 1 :])
            cov[i, i + 1 : n] = row
            cov[i + 1 : n, i] = row
    cov[n:, n:] = np.minimum.outer(t, t)
    s = hurst + 0.5
    # Cov(I_ti, W_tj) depends on t_j only through min(t_i, t_j).
    cross = np.sqrt(2.0 * hurst) / s * (
        t[:, None] ** s - (t[:, None] - np.minimum.outer(t, t)) ** s
    )
    cov[:n, n:] = cross
    cov[n:, :n] = cross.T
    return cholesky(cov)


def _chunk_bounds(m: int, chunk_size: int):
    return [(a, min(a + chunk_size, m)) for a in range(0, m, chunk_size)]


class _Recorder:
    """Preallocated output arrays; chunks write disjoint column slices."""

    def __init__(self, schedule: GridSchedule, m: int, n_chunks: int, record_paths: bool):
        mcount = schedule.maturities.size
        self.terminals = np.empty((mcount, m))
        self.running_min = np.empty((mcount, m))
        self.running_max = np.empty((mcount, m))
        self.v_sums = [None] * n_chunks
        self.s_paths = np.empty((m, schedule.n + 1)) if record_paths else None
        self.v_paths = np.empty((m, schedule.n + 1)) if record_paths else None


def _step_prices(
    logS, v, tau, params, dw, dwp, curmin, curmax
):
    shock = params.rho * dw + np.sqrt(1.0 - params.rho**2) * dwp
    logS += (params.r - 0.5 * v) * tau + np.sqrt(v) * shock
    S = np.exp(logS)
    np.minimum(curmin, S, out=curmin)
    np.maximum(curmax, S, out=curmax)
    return S


def _simulate_chunk_soe(
    params: ModelParams,
    schedule: GridSchedule,
    step_cov: StepCovariance,
    scheme: str,
    comp: np.ndarray,
    xi_grid: np.ndarray,
    chunk_id: int,
    bounds: tuple,
    base: RngStream,
    rec: _Recorder,
):
    a, b = bounds
    c = b - a
    tau = schedule.tau
    soe = step_cov.soe
    nterms = soe.n_terms
    gen = base.child(2 * chunk_id).generator()
    genp = base.child(2 * chunk_id + 1).generator()
    chol_t = step_cov.chol.T
    decay = np.exp(-soe.nodes * tau)
    sqrt2h = np.sqrt(2.0 * params.hurst)
    sqrt_tau = np.sqrt(tau)

    state = VolterraState(historical=np.zeros((c, nterms)), local=np.zeros(c))
    logS = np.full(c, np.log(params.s0))
    v = np.full(c, xi_grid[0])
    curmin = np.full(c, params.s0)
    curmax = np.full(c, params.s0)
    v_sum = np.empty(schedule.n + 1)
    v_sumsq = np.empty(schedule.n + 1)
    v_sum[0] = np.sum(v)
    v_sumsq[0] = np.sum(v * v)
    if rec.s_paths is not None:
        rec.s_paths[a:b, 0] = params.s0
        rec.v_paths[a:b, 0] = v
    mat_index = {step: j for j, step in enumerate(schedule.maturity_steps)}

    for i in range(schedule.n):
        xi = gen.standard_normal((c, nterms + 2)) @ chol_t
        dwp = genp.standard_normal(c) * sqrt_tau
        S = _step_prices(logS, v, tau, params, xi[:, 0], dwp, curmin, curmax)
        if scheme == "msoe":
            driver = sqrt2h * ((state.historical * decay) @ soe.weights) + xi[:, -1]
            state.local = xi[:, -1]
            state.historical = state.historical * decay + xi[:, 1 : nterms + 1]
        else:
            state.historical = state.historical * decay + xi[:, 1 : nterms + 1]
            driver = sqrt2h * (state.historical @ soe.weights)
        expo = params.eta * driver - 0.5 * params.eta**2 * comp[i]
        peak = float(np.max(expo)) if c else 0.0
        if not np.isfinite(peak) or peak > OVERFLOW_EXPONENT:
            raise SimulationError(
                f"variance exponent overflow at step {i + 1} "
                f"(max exponent {peak:.3g}, chunk {chunk_id})"
            )
        v = xi_grid[i + 1] * np.exp(expo)
        v_sum[i + 1] = np.sum(v)
        v_sumsq[i + 1] = np.sum(v * v)
        if rec.s_paths is not None:
            rec.s_paths[a:b, i + 1] = S
            rec.v_paths[a:b, i + 1] = v
        j = mat_index.get(i + 1)
        if j is not None:
            rec.terminals[j, a:b] = S
            rec.running_min[j, a:b] = curmin
            rec.running_max[j, a:b] = curmax
    rec.v_sums[chunk_id] = (v_sum, v_sumsq)


def _simulate_chunk_cholesky(
    params: ModelParams,
    schedule: GridSchedule,
    joint_chol_t: np.ndarray,
    xi_grid: np.ndarray,
    chunk_id: int,
    bounds: tuple,
    base: RngStream,
    rec: _Recorder,
):
    a, b = bounds
    c = b - a
    n = schedule.n
    tau = schedule.tau
    gen = base.child(2 * chunk_id).generator()
    genp = base.child(2 * chunk_id + 1).generator()
    joint = gen.standard_normal((c, 2 * n)) @ joint_chol_t
    volterra = joint[:, :n]
    dW = np.diff(joint[:, n:], axis=1, prepend=0.0)
    t = schedule.times
    # Exact variance law with the closed-form compensator t^(2H); V at the
    # left endpoint drives each price step.
    expo = params.eta * volterra - 0.5 * params.eta**2 * t[1:] ** (2.0 * params.hurst)
    peak = float(np.max(expo)) if c else 0.0
    if not np.isfinite(peak) or peak > OVERFLOW_EXPONENT:
        raise SimulationError(
            f"variance exponent overflow in Cholesky scheme (max exponent {peak:.3g})"
        )
    V = np.empty((c, n + 1))
    V[:, 0] = xi_grid[0]
    V[:, 1:] = xi_grid[1:] * np.exp(expo)

    logS = np.full(c, np.log(params.s0))
    curmin = np.full(c, params.s0)
    curmax = np.full(c, params.s0)
    sqrt_tau = np.sqrt(tau)
    if rec.s_paths is not None:
        rec.s_paths[a:b, 0] = params.s0
        rec.v_paths[a:b] = V
    mat_index = {step: j for j, step in enumerate(schedule.maturity_steps)}
    for i in range(n):
        dwp = genp.standard_normal(c) * sqrt_tau
        S = _step_prices(logS, V[:, i], tau, params, dW[:, i], dwp, curmin, curmax)
        if rec.s_paths is not None:
            rec.s_paths[a:b, i + 1] = S
        j = mat_index.get(i + 1)
        if j is not None:
            rec.terminals[j, a:b] = S
            rec.running_min[j, a:b] = curmin
            rec.running_max[j, a:b] = curmax
    rec.v_sums[chunk_id] = (
        np.sum(V, axis=0),
        np.sum(V * V, axis=0),
    )


def simulate_paths(
    params: ModelParams,
    schedule: GridSchedule,
    soe: SoeApprox | None,
    scheme: str,
    m: int,
    seed: int,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    record_paths: bool = False,
) -> PathBatch:
    """Simulate m paths and collect terminals, extrema and variance moments.

    ``soe`` is required for the "msoe" and "soe" schemes and ignored by
    "cholesky".  Output is bit-identical for any ``threads`` value.
    """
    scheme = scheme.lower()
    if scheme not in _SCHEMES:
        raise DomainError(f"scheme must be one of {_SCHEMES}, got {scheme!r}")
    if m < 1:
        raise DomainError("need at least one path")
    if chunk_size < 1:
        raise DomainError("chunk_size must be positive")
    xi_grid = np.asarray(params.xi0(schedule.times), dtype=float)
    if np.any(xi_grid <= 0.0):
        raise DomainError("forward variance must be positive on the whole grid")

    bounds = _chunk_bounds(m, chunk_size)
    rec = _Recorder(schedule, m, len(bounds), record_paths)
    base = RngStream(seed)

    if scheme == "cholesky":
        if schedule.n > CHOLESKY_MAX_STEPS:
            raise DomainError(
                f"Cholesky scheme supports at most {CHOLESKY_MAX_STEPS} steps, "
                f"got {schedule.n}"
            )
        joint_chol_t = _joint_cholesky_factor(params.hurst, schedule).T

        def run(cid):
            _simulate_chunk_cholesky(
                params, schedule, joint_chol_t, xi_grid, cid, bounds[cid], base, rec
            )

    else:
        if soe is None:
            raise DomainError(f"the {scheme} scheme requires a kernel approximation")
        step_cov = build_covariance(soe, params.hurst, schedule.tau)
        t_grid = schedule.times[1:]
        if scheme == "msoe":
            comp = second_moment_approx(soe, params.hurst, schedule.tau, t_grid)
        else:
            comp = soe_second_moment(soe, params.hurst, t_grid)
        comp = np.atleast_1d(comp)

        def run(cid):
            _simulate_chunk_soe(
                params, schedule, step_cov, scheme, comp, xi_grid, cid,
                bounds[cid], base, rec,
            )

    if threads <= 1 or len(bounds) == 1:
        for cid in range(len(bounds)):
            run(cid)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(len(bounds))))

    # Reduce variance moments in fixed chunk order for determinism.
    v_sum = np.zeros(schedule.n + 1)
    v_sumsq = np.zeros(schedule.n + 1)
    for s, sq in rec.v_sums:
        v_sum += s
        v_sumsq += sq
    v_mean = v_sum / m
    v_var = np.maximum(v_sumsq / m - v_mean**2, 0.0)

    return PathBatch(
        scheme=scheme,
        maturities=schedule.maturities.copy(),
        terminals=rec.terminals,
        running_min=rec.running_min,
        running_max=rec.running_max,
        seed=seed,
        v_mean=v_mean,
        v_var=v_var,
        s_paths=rec.s_paths,
        v_paths=rec.v_paths,
    )


def dump_paths(path, batch: PathBatch, tau: float) -> None:
    """Write stored trajectories as CSV rows "path,step,t,S,V"."""
    if batch.s_paths is None or batch.v_paths is None:
        raise DomainError("batch was simulated without record_paths")
    m, npts = batch.s_paths.shape
    with open(path, "w") as fh:
        fh.write("path,step,t,S,V\n")
        for p in range(m):
            for i in range(npts):
                fh.write(
                    f"{p},{i},{i * tau:.17g},"
                    f"{batch.s_paths[p, i]:.17g},{batch.v_paths[p, i]:.17g}\n"
                )


class FrozenNoiseSimulator:
    """Hybrid-scheme simulator over a frozen noise block for calibration.

    One call to :meth:`load_noise` draws the full Gaussian block for an
    iteration; subsequent :meth:`terminals` calls reuse it, so
    finite-difference probes see common random numbers.  The Brownian-side
    arrays (kernel-correlated shocks and price drivers) are cached per Hurst
    value: probes that move only (xi0, rho, eta) skip the expensive matrix
    work.  Stream layout matches :func:`simulate_paths`, so results are
    bit-identical to an "msoe" run with the same seed and chunk size.
    """

    def __init__(self, schedule: GridSchedule, m: int, chunk_size: int = DEFAULT_CHUNK):
        if m < 1:
            raise DomainError("need at least one path")
        self.schedule = schedule
        self.m = m
        self.chunk_size = chunk_size
        self._z = None
        self._wperp = None
        self._soe = None
        self._driver_cache = {}

    def load_noise(self, soe: SoeApprox, seed: int) -> None:
        """Draw the iteration's noise block for a given kernel approximation."""
        n = self.schedule.n
        dim = soe.n_terms + 2
        base = RngStream(seed)
        z = np.empty((n, self.m, dim))
        wperp = np.empty((n, self.m))
        for cid, (a, b) in enumerate(_chunk_bounds(self.m, self.chunk_size)):
            gen = base.child(2 * cid).generator()
            genp = base.child(2 * cid + 1).generator()
            z[:, a:b, :] = gen.standard_normal((n, b - a, dim))
            wperp[:, a:b] = genp.standard_normal((n, b - a))
        self._z = z
        self._wperp = wperp * np.sqrt(self.schedule.tau)
        self._soe = soe
        self._driver_cache.clear()

    def _drivers(self, hurst: float):
        cached = self._driver_cache.get(hurst)
        if cached is not None:
            return cached
        soe = self._soe
        tau = self.schedule.tau
        step_cov = build_covariance(soe, hurst, tau)
        chol_t = step_cov.chol.T
        decay = np.exp(-soe.nodes * tau)
        sqrt2h = np.sqrt(2.0 * hurst)
        n = self.schedule.n
        nterms = soe.n_terms
        dW = np.empty((n, self.m))
        driver = np.empty((n, self.m))
        hist = np.zeros((self.m, nterms))
        for i in range(n):
            xi = self._z[i] @ chol_t
            dW[i] = xi[:, 0]
            driver[i] = sqrt2h * ((hist * decay) @ soe.weights) + xi[:, -1]
            hist = hist * decay + xi[:, 1 : nterms + 1]
        comp = np.atleast_1d(
            second_moment_approx(soe, hurst, tau, self.schedule.times[1:])
        )
        self._driver_cache.clear()  # keep at most one H besides probes of it
        self._driver_cache[hurst] = (dW, driver, comp)
        return dW, driver, comp

    def terminals(self, params: ModelParams) -> np.ndarray:
        """Terminal prices (n_maturities, m) under the frozen noise."""
        if self._z is None:
            raise SimulationError("no noise loaded; call load_noise first")
        dW, driver, comp = self._drivers(params.hurst)
        schedule = self.schedule
        tau = schedule.tau
        xi_grid = np.asarray(params.xi0(schedule.times), dtype=float)
        if np.any(xi_grid <= 0.0):
            raise DomainError("forward variance must be positive on the whole grid")
        rho_perp = np.sqrt(1.0 - params.rho**2)
        half_eta2 = 0.5 * params.eta**2
        out = np.empty((schedule.maturities.size, self.m))
        mat_index = {step: j for j, step in enumerate(schedule.maturity_steps)}
        logS = np.full(self.m, np.log(params.s0))
        v = np.full(self.m, xi_grid[0])
        for i in range(schedule.n):
            shock = params.rho * dW[i] + rho_perp * self._wperp[i]
            logS += (params.r - 0.5 * v) * tau + np.sqrt(v) * shock
            expo = params.eta * driver[i] - half_eta2 * comp[i]
            peak = float(np.max(expo))
            if not np.isfinite(peak) or peak > OVERFLOW_EXPONENT:
                raise SimulationError(
                    f"variance exponent overflow at step {i + 1} (max {peak:.3g})"
                )
            v = xi_grid[i + 1] * np.exp(expo)
            j = mat_index.get(i + 1)
            if j is not None:
                out[j] = np.exp(logS)
        return out
