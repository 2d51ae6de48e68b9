"""Fractional power kernel and certified sum-of-exponentials approximations.

The kernel t^(H - 1/2) with H in (0, 1/2) is completely monotone, so it is a
weighted mixture of decaying exponentials.  Discretizing that mixture with
Gauss-Jacobi quadrature on [0, 1] (which absorbs the algebraic singularity of
the mixing density at the origin) and Gauss-Legendre quadrature on dyadic
intervals [2^j, 2^(j+1)] yields a finite sum of exponentials whose uniform
error on [delta, T] is certified on a dense geometric grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc, roots_jacobi

from .errors import DomainError, KernelError, ParseError

#: Default number of geometric grid points used to certify the uniform error.
DEFAULT_CERT_GRID = 10_000

#: Hard cap on per-interval quadrature node counts during refinement.
_MAX_NODES_PER_INTERVAL = 512


@dataclass(frozen=True)
class SoeApprox:
    """A finite sum-of-exponentials approximation of the fractional kernel.

    ``eval_soe(self, t)`` approximates ``t^(hurst - 1/2)`` for t in
    ``[valid_from, valid_to]``.  ``target_eps`` is the uniform accuracy the
    generator was asked for; it is None for approximations loaded from file.
    """

    nodes: np.ndarray
    weights: np.ndarray
    hurst: float | None = None
    valid_from: float | None = None
    valid_to: float | None = None
    target_eps: float | None = None

    def __post_init__(self):
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if nodes.size == 0:
            nodes = nodes.reshape(0)
            weights = weights.reshape(0)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise DomainError("nodes and weights must be 1-d and equally long")
        if nodes.size:
            if not np.all(np.isfinite(nodes)) or np.any(nodes < 0):
                raise DomainError("nodes must be finite and non-negative")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise DomainError("weights must be finite and positive")
        if self.valid_from is not None and self.valid_to is not None:
            if not self.valid_from < self.valid_to:
                raise DomainError("valid_from must be smaller than valid_to")

    @property
    def n_terms(self) -> int:
        return int(self.nodes.size)


def eval_fractional_kernel(t, hurst: float):
    """Evaluate the power kernel t^(hurst - 1/2) for t > 0."""
    if not 0.0 < hurst < 0.5:
        raise DomainError(f"hurst must lie in (0, 1/2), got {hurst}")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("kernel argument must be positive")
    out = t ** (hurst - 0.5)
    return float(out) if out.ndim == 0 else out


def bernstein_weight(x, hurst: float):
    """Density of the exponential mixture: x^(-hurst - 1/2) / Gamma(1/2 - hurst)."""
    if not 0.0 < hurst < 0.5:
        raise DomainError(f"hurst must lie in (0, 1/2), got {hurst}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise DomainError("mixture density argument must be positive")
    out = x ** (-hurst - 0.5) / gamma_fn(0.5 - hurst)
    return float(out) if out.ndim == 0 else out


def eval_soe(soe: SoeApprox, t):
    """Evaluate sum_k weights_k * exp(-nodes_k * t) for t >= 0."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    if soe.n_terms == 0:
        out = np.zeros_like(t, dtype=float)
        return float(out) if scalar else out
    out = np.exp(-np.multiply.outer(t, soe.nodes)) @ soe.weights
    return float(out) if scalar else out


def _geometric_grid(delta: float, horizon: float, points: int) -> np.ndarray:
    return np.geomspace(delta, horizon, points)


def sup_error(
    soe: SoeApprox,
    hurst: float,
    delta: float,
    horizon: float,
    grid_points: int = DEFAULT_CERT_GRID,
) -> float:
    """Max kernel-approximation error over a geometric grid in [delta, horizon].

    The grid is geometric because the kernel varies fastest near delta.
    """
    if grid_points < 2:
        raise DomainError("grid_points must be at least 2")
    if not 0.0 < delta < horizon:
        raise DomainError("need 0 < delta < horizon")
    grid = _geometric_grid(delta, horizon, grid_points)
    return float(np.max(np.abs(eval_fractional_kernel(grid, hurst) - eval_soe(soe, grid))))


def _truncation_tail(x_max: float, delta: float, hurst: float) -> float:
    # Neglected mixture mass, evaluated at the worst point t = delta:
    # integral_{x_max}^inf exp(-x*delta) x^(-hurst-1/2) dx / Gamma(1/2 - hurst)
    # = delta^(hurst-1/2) * Q(1/2 - hurst, x_max * delta)
    return delta ** (hurst - 0.5) * float(gammaincc(0.5 - hurst, x_max * delta))


def _quadrature_soe(hurst: float, n_dyadic: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights from p-point rules on [0,1] and the dyadic intervals."""
    inv_gamma = 1.0 / gamma_fn(0.5 - hurst)
    beta = -hurst - 0.5
    # Gauss-Jacobi on [0, 1] with weight x^beta absorbs the singularity.
    xj, wj = roots_jacobi(p, 0.0, beta)
    nodes = [(xj + 1.0) / 2.0]
    weights = [wj * 0.5 ** (beta + 1.0) * inv_gamma]
    xl, wl = np.polynomial.legendre.leggauss(p)
    for j in range(n_dyadic):
        a, b = 2.0**j, 2.0 ** (j + 1)
        x = 0.5 * (b - a) * xl + 0.5 * (a + b)
        nodes.append(x)
        weights.append(0.5 * (b - a) * wl * x**beta * inv_gamma)
    return np.concatenate(nodes), np.concatenate(weights)


def generate_soe(
    hurst: float,
    delta: float,
    horizon: float,
    eps: float,
    grid_points: int = DEFAULT_CERT_GRID,
) -> SoeApprox:
    """Build a sum of exponentials with uniform error <= eps on [delta, horizon].

    The dyadic frequency range is truncated where the remaining mixture mass
    falls below eps/10, per-interval node counts start at ceil(log10(1/eps))
    and are doubled until the error certified on a geometric grid passes.
    """
    if not 0.0 < hurst < 0.5:
        raise DomainError(f"hurst must lie in (0, 1/2), got {hurst}")
    if not 0.0 < delta < horizon:
        raise DomainError("need 0 < delta < horizon")
    if eps <= 0.0:
        raise DomainError("eps must be positive")

    # Intervals [2^j, 2^(j+1)] for j = 0..J cover frequencies up to 2^(J+1).
    top = 0
    while _truncation_tail(2.0 ** (top + 1), delta, hurst) > eps / 10.0:
        top += 1
        if top > 60:
            raise KernelError("frequency truncation did not converge")
    n_dyadic = top + 1

    p = max(1, math.ceil(math.log10(1.0 / eps)))
    best_err = math.inf
    best = None
    while p <= _MAX_NODES_PER_INTERVAL:
        nodes, weights = _quadrature_soe(hurst, n_dyadic, p)
        soe = SoeApprox(nodes, weights, hurst, delta, horizon, eps)
        err = sup_error(soe, hurst, delta, horizon, grid_points)
        if err < best_err:
            best_err, best = err, soe
        if err <= eps:
            return soe
        p *= 2
    raise KernelError(
        f"could not reach eps={eps:g}; best certified error {best_err:.3g} "
        f"with {best.n_terms} terms",
        best_error=best_err,
    )


def write_soe(path, soe: SoeApprox) -> None:
    """Write nodes/weights as CSV with full double precision."""
    with open(path, "w") as fh:
        fh.write("lambda,omega\n")
        for lam, om in zip(soe.nodes, soe.weights):
            fh.write(f"{lam:.17g},{om:.17g}\n")


def read_soe(path) -> SoeApprox:
    """Read a nodes/weights CSV written by :func:`write_soe`."""
    nodes, weights = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "lambda,omega":
            raise ParseError(f"expected header 'lambda,omega', got {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected two comma-separated values", line=lineno)
            try:
                lam, om = float(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric entry", line=lineno) from None
            if not math.isfinite(lam) or lam < 0:
                raise ParseError(f"line {lineno}: node must be finite and >= 0", line=lineno)
            if not math.isfinite(om) or om <= 0:
                raise ParseError(f"line {lineno}: weight must be finite and > 0", line=lineno)
            nodes.append(lam)
            weights.append(om)
    return SoeApprox(np.array(nodes), np.array(weights))
