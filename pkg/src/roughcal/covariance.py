"""Step covariance of the (N+2)-dimensional Gaussian vector driving one step.

Per time step the scheme needs, jointly: the Brownian increment, the N
exponentially-weighted integrals of the Brownian motion over the step, and
the exact local Volterra integral.  The covariance depends only on the step
size, so it is assembled and factored once per configuration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .errors import DomainError, FactorizationError
from .kernels import SoeApprox
from .rng import RngStream

_JITTER_BASE = 1e-14
_JITTER_TRIES = 3


def lower_incomplete_gamma(s: float, x) -> float:
    """gamma(s, x) = integral_0^x u^(s-1) e^(-u) du for s > 0, x >= 0."""
    if s <= 0.0:
        raise DomainError("shape parameter must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("upper limit must be non-negative")
    out = gammainc(s, x) * gamma_fn(s)
    return float(out) if out.ndim == 0 else out


def _one_minus_exp_over(c, tau: float):
    """(1 - exp(-c*tau)) / c, with the tau limit at c = 0."""
    c = np.asarray(c, dtype=float)
    out = np.where(c > 0.0, -np.expm1(-np.where(c > 0.0, c, 1.0) * tau) / np.where(c > 0.0, c, 1.0), tau)
    return out


@dataclass(frozen=True)
class StepCovariance:
    """Covariance matrix of one step's Gaussian vector and its Cholesky factor.

    Component order: Brownian increment, the N exponential integrals (one per
    node, in node order), then the exact local Volterra integral.
    """

    matrix: np.ndarray
    chol: np.ndarray
    tau: float
    soe: SoeApprox
    hurst: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_covariance(soe: SoeApprox, hurst: float, tau: float) -> StepCovariance:
    """Assemble the (N+2) x (N+2) step covariance and factor it."""
    if tau <= 0.0:
        raise DomainError("step size must be positive")
    if not 0.0 < hurst < 0.5:
        raise DomainError(f"hurst must lie in (0, 1/2), got {hurst}")
    lam = soe.nodes
    n = lam.size
    dim = n + 2
    sigma = np.empty((dim, dim))
    sqrt2h = np.sqrt(2.0 * hurst)
    hp = hurst + 0.5

    sigma[0, 0] = tau
    sigma[0, 1 : n + 1] = _one_minus_exp_over(lam, tau)
    # Pairwise exponential-integral covariances.
    sigma[1 : n + 1, 1 : n + 1] = _one_minus_exp_over(lam[:, None] + lam[None, :], tau)
    sigma[dim - 1, 0] = sqrt2h * tau**hp / hp
    with np.errstate(divide="ignore"):
        local_col = np.where(
            lam > 0.0,
            sqrt2h * lower_incomplete_gamma(hp, lam * tau) / np.where(lam > 0.0, lam, 1.0) ** hp,
            sqrt2h * tau**hp / hp,
        )
    sigma[dim - 1, 1 : n + 1] = local_col
    sigma[dim - 1, dim - 1] = tau ** (2.0 * hurst)
    sigma[0, dim - 1] = sigma[dim - 1, 0]
    sigma[1 : n + 1, 0] = sigma[0, 1 : n + 1]
    sigma[1 : n + 1, dim - 1] = sigma[dim - 1, 1 : n + 1]

    chol = cholesky(sigma)
    return StepCovariance(matrix=sigma, chol=chol, tau=tau, soe=soe, hurst=hurst)


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T = matrix.

    The matrix is positive semidefinite in exact arithmetic; roundoff is
    absorbed by an escalating diagonal jitter before giving up.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError("expected a square matrix")
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(matrix).max())):
        raise DomainError("expected a symmetric matrix")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_BASE * np.trace(matrix) / matrix.shape[0]
    for _ in range(_JITTER_TRIES):
        try:
            return np.linalg.cholesky(matrix + jitter * np.eye(matrix.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"matrix not positive definite within jitter budget (last jitter {jitter:g})"
    )


def sample_gaussian(chol: np.ndarray, stream: RngStream, count: int) -> np.ndarray:
    """Draw ``count`` correlated Gaussian vectors L @ z from the stream."""
    gen = stream.generator()
    z = gen.standard_normal((count, chol.shape[0]))
    return z @ chol.T
