"""Forward-variance curve parameterizations and parameter transforms.

The initial forward variance xi_0(t) can be a constant, a piecewise-constant
curve on pillar dates, a Nelson-Siegel curve, or a Nelson-Siegel curve with a
small multiplicative neural-network correction.  The module also provides the
bijections between unconstrained optimization variables and the legal
parameter box (H, rho, eta, curve parameters), and the three synthetic
ground-truth curves used for curve-calibration experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import DomainError, ParseError

#: Negative slope of the leaky ReLU used in the correction network.
LEAKY_SLOPE = 0.01

#: Hidden widths of the correction network (input and output are scalar).
_NN_HIDDEN = (8, 8)

#: Total scalar weight count of the 1 -> 8 -> 8 -> 1 network with biases.
NN_WEIGHT_COUNT = 1 * 8 + 8 + 8 * 8 + 8 + 8 * 1 + 1


def softplus(x):
    """log(1 + exp(x)), computed without overflow."""
    return np.logaddexp(0.0, np.asarray(x, dtype=float))


def inv_softplus(y):
    """Inverse of softplus; defined for y > 0."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        raise DomainError("inverse softplus requires positive input")
    return y + np.log1p(-np.exp(-y))


@dataclass(frozen=True)
class ConstantCurve:
    """xi_0(t) = level for every t >= 0."""

    level: float

    def __post_init__(self):
        if self.level <= 0.0:
            raise DomainError("forward variance level must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise DomainError("curve argument must be non-negative")
        out = np.full_like(t, self.level, dtype=float)
        return float(out) if out.ndim == 0 else out

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.level])

    def with_theta(self, theta) -> "ConstantCurve":
        return ConstantCurve(float(np.asarray(theta).reshape(1)[0]))


@dataclass(frozen=True)
class PiecewiseConstantCurve:
    """Piecewise-constant curve: level l on the bucket [T_{l-1}, T_l).

    ``pillars`` holds the L+1 bucket boundaries T_0 < ... < T_L; the final
    right endpoint T_L is included in the last bucket.
    """

    pillars: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        pillars = np.asarray(self.pillars, dtype=float)
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "pillars", pillars)
        object.__setattr__(self, "levels", levels)
        if pillars.ndim != 1 or levels.ndim != 1 or pillars.size != levels.size + 1:
            raise DomainError("need L+1 pillars for L levels")
        if levels.size == 0:
            raise DomainError("need at least one bucket")
        if np.any(np.diff(pillars) <= 0.0):
            raise DomainError("pillars must be strictly increasing")
        if np.any(levels <= 0.0):
            raise DomainError("bucket levels must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.pillars[0], self.pillars[-1]
        if np.any(t < lo) or np.any(t > hi):
            raise DomainError(f"curve argument outside pillar coverage [{lo:g}, {hi:g}]")
        idx = np.searchsorted(self.pillars, t, side="right") - 1
        idx = np.clip(idx, 0, self.levels.size - 1)
        out = self.levels[idx]
        return float(out) if out.ndim == 0 else out

    @property
    def theta(self) -> np.ndarray:
        return self.levels.copy()

    def with_theta(self, theta) -> "PiecewiseConstantCurve":
        return PiecewiseConstantCurve(self.pillars, np.asarray(theta, dtype=float))


@dataclass(frozen=True)
class NelsonSiegelCurve:
    """Nelson-Siegel curve b0 + b1 e^(-t/tau) + b2 (t/tau) e^(-t/tau)."""

    beta0: float
    beta1: float
    beta2: float
    tau_ns: float

    def __post_init__(self):
        if self.tau_ns <= 0.0:
            raise DomainError("Nelson-Siegel decay time must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise DomainError("curve argument must be non-negative")
        s = t / self.tau_ns
        decay = np.exp(-s)
        out = self.beta0 + self.beta1 * decay + self.beta2 * s * decay
        return float(out) if out.ndim == 0 else out

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.beta0, self.beta1, self.beta2, self.tau_ns])

    def with_theta(self, theta) -> "NelsonSiegelCurve":
        b0, b1, b2, tau = np.asarray(theta, dtype=float)
        return NelsonSiegelCurve(b0, b1, b2, tau)


def leaky_relu(x, slope: float = LEAKY_SLOPE):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x, slope * x)


def _unpack_nn(weights: np.ndarray):
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != NN_WEIGHT_COUNT:
        raise DomainError(f"expected {NN_WEIGHT_COUNT} network weights, got {w.size}")
    h1, h2 = _NN_HIDDEN
    i = 0
    w1 = w[i : i + h1].reshape(h1, 1); i += h1
    b1 = w[i : i + h1]; i += h1
    w2 = w[i : i + h1 * h2].reshape(h2, h1); i += h1 * h2
    b2 = w[i : i + h2]; i += h2
    w3 = w[i : i + h2].reshape(1, h2); i += h2
    b3 = w[i : i + 1]
    return w1, b1, w2, b2, w3, b3


def nn_forward(weights, t):
    """Scalar 1 -> 8 -> 8 -> 1 network with leaky-ReLU hidden activations."""
    w1, b1, w2, b2, w3, b3 = _unpack_nn(weights)
    t = np.asarray(t, dtype=float)
    x = t.reshape(-1, 1)
    a1 = leaky_relu(x @ w1.T + b1)
    a2 = leaky_relu(a1 @ w2.T + b2)
    out = (a2 @ w3.T + b3).reshape(t.shape)
    return float(out) if out.ndim == 0 else out


def init_nn_weights(rng: np.random.Generator) -> np.ndarray:
    """Uniform [-0.5, 0.5] / fan_in initialization per layer, zero biases."""
    h1, h2 = _NN_HIDDEN
    parts = [
        rng.uniform(-0.5, 0.5, h1 * 1) / 1.0,
        np.zeros(h1),
        rng.uniform(-0.5, 0.5, h2 * h1) / h1,
        np.zeros(h2),
        rng.uniform(-0.5, 0.5, 1 * h2) / h2,
        np.zeros(1),
    ]
    return np.concatenate(parts)


@dataclass(frozen=True)
class NelsonSiegelNNCurve:
    """Nelson-Siegel with a multiplicative network correction.

    xi_0(t) = | ns(t) * (1 + kappa * NN(t)) |; the absolute value keeps the
    curve positive for any network weights.
    """

    ns: NelsonSiegelCurve
    kappa: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size != NN_WEIGHT_COUNT:
            raise DomainError(f"expected {NN_WEIGHT_COUNT} network weights, got {w.size}")
        object.__setattr__(self, "weights", w)

    def __call__(self, t):
        base = np.asarray(self.ns(t), dtype=float)
        corr = 1.0 + self.kappa * np.asarray(nn_forward(self.weights, t), dtype=float)
        out = np.abs(base * corr)
        return float(out) if out.ndim == 0 else out

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.ns.theta, [self.kappa], self.weights])

    def with_theta(self, theta) -> "NelsonSiegelNNCurve":
        theta = np.asarray(theta, dtype=float)
        return NelsonSiegelNNCurve(
            self.ns.with_theta(theta[:4]), float(theta[4]), theta[5:]
        )


def write_nn_weights(path, weights) -> None:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != NN_WEIGHT_COUNT:
        raise DomainError(f"expected {NN_WEIGHT_COUNT} network weights, got {w.size}")
    with open(path, "w") as fh:
        fh.write("weight\n")
        for v in w:
            fh.write(f"{v:.17g}\n")


def read_nn_weights(path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "weight":
            raise ParseError(f"expected header 'weight', got {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            try:
                vals.append(float(raw))
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric entry", line=lineno) from None
    w = np.array(vals)
    if w.size != NN_WEIGHT_COUNT:
        raise ParseError(f"expected {NN_WEIGHT_COUNT} weights, found {w.size}")
    return w


# ---------------------------------------------------------------------------
# Unconstrained <-> constrained parameter transforms.
#
# The optimizer may work in an unconstrained space; these bijections map a
# flat vector u = (u_H, u_rho, u_eta, u_theta...) into the legal box
# H in (0, 1/2), rho in (-1, 0), eta > 0, positive curve levels.

_SCALAR_COUNT = 3  # H, rho, eta


def _curve_theta_dim(curve) -> int:
    return curve.theta.size


def _constrain_theta(curve, u_theta: np.ndarray) -> np.ndarray:
    if isinstance(curve, (ConstantCurve, PiecewiseConstantCurve)):
        return softplus(u_theta)
    if isinstance(curve, NelsonSiegelCurve):
        # Positive base level and decay time; slope/curvature are free.
        return np.array(
            [softplus(u_theta[0]), u_theta[1], u_theta[2], softplus(u_theta[3])]
        )
    if isinstance(curve, NelsonSiegelNNCurve):
        ns_part = _constrain_theta(curve.ns, u_theta[:4])
        return np.concatenate([ns_part, u_theta[4:]])
    raise DomainError(f"unsupported curve type {type(curve).__name__}")


def _unconstrain_theta(curve, theta: np.ndarray) -> np.ndarray:
    if isinstance(curve, (ConstantCurve, PiecewiseConstantCurve)):
        return inv_softplus(theta)
    if isinstance(curve, NelsonSiegelCurve):
        return np.array(
            [inv_softplus(theta[0]), theta[1], theta[2], inv_softplus(theta[3])]
        )
    if isinstance(curve, NelsonSiegelNNCurve):
        ns_part = _unconstrain_theta(curve.ns, theta[:4])
        return np.concatenate([ns_part, theta[4:]])
    raise DomainError(f"unsupported curve type {type(curve).__name__}")


def constrain(u, curve=None):
    """Map an unconstrained vector to (H, rho, eta[, theta]).

    With a curve template the tail of ``u`` parameterizes the curve and the
    constrained theta vector is returned as a fourth element.
    """
    u = np.asarray(u, dtype=float)
    expected = _SCALAR_COUNT + (0 if curve is None else _curve_theta_dim(curve))
    if u.shape != (expected,):
        raise DomainError(f"expected an unconstrained vector of length {expected}")
    hurst = 0.5 * float(expit(u[0]))
    rho = -float(expit(u[1]))
    eta = float(softplus(u[2]))
    if curve is None:
        return hurst, rho, eta
    return hurst, rho, eta, _constrain_theta(curve, u[_SCALAR_COUNT:])


def unconstrain(hurst: float, rho: float, eta: float, curve=None, theta=None):
    """Inverse of :func:`constrain`; defined on the open parameter box."""
    if not 0.0 < hurst < 0.5:
        raise DomainError(f"hurst must lie strictly inside (0, 1/2), got {hurst}")
    if not -1.0 < rho < 0.0:
        raise DomainError(f"rho must lie strictly inside (-1, 0), got {rho}")
    if eta <= 0.0:
        raise DomainError(f"eta must be positive, got {eta}")
    head = np.array(
        [float(logit(2.0 * hurst)), float(logit(-rho)), float(inv_softplus(eta))]
    )
    if curve is None:
        return head
    theta = curve.theta if theta is None else np.asarray(theta, dtype=float)
    return np.concatenate([head, _unconstrain_theta(curve, theta)])


def ground_truth_curve(which: int):
    """One of the three synthetic ground-truth forward-variance curves."""
    if which == 1:
        return lambda t: 0.05 * np.exp(-np.asarray(t, dtype=float))
    if which == 2:
        return NelsonSiegelCurve(0.02, 0.03, 0.6, 0.2)
    if which == 3:
        def curve3(t):
            t = np.asarray(t, dtype=float)
            return 0.03 + 0.05 * np.exp(-5.0 * (t - 0.3) ** 2) + 0.01 * np.sin(15.0 * t)

        return curve3
    raise DomainError(f"ground-truth curve index must be 1, 2 or 3, got {which}")
