"""Black-Scholes pricing, implied-volatility inversion, smiles and surfaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, InversionError
from .paths import PathBatch
from .pricing import price_european

#: Absolute pricing accuracy of the inversion, in units of s0.
INVERSION_TOL = 1e-10

_VOL_LO, _VOL_HI = 1e-10, 50.0


def bs_price(s0: float, strike: float, r: float, maturity: float, sigma: float, kind: str) -> float:
    """Black-Scholes price; sigma = 0 gives the discounted forward intrinsic."""
    if kind not in ("call", "put"):
        raise DomainError(f"kind must be 'call' or 'put', got {kind!r}")
    if s0 <= 0.0 or strike <= 0.0:
        raise DomainError("spot and strike must be positive")
    if maturity <= 0.0:
        raise DomainError("maturity must be positive")
    if sigma < 0.0:
        raise DomainError("volatility must be non-negative")
    df = np.exp(-r * maturity)
    forward = s0 / df
    if sigma == 0.0:
        intrinsic = forward - strike if kind == "call" else strike - forward
        return float(df * max(intrinsic, 0.0))
    vol = sigma * np.sqrt(maturity)
    d1 = (np.log(forward / strike) + 0.5 * vol * vol) / vol
    d2 = d1 - vol
    if kind == "call":
        return float(df * (forward * ndtr(d1) - strike * ndtr(d2)))
    return float(df * (strike * ndtr(-d2) - forward * ndtr(-d1)))


def bs_vega(s0: float, strike: float, r: float, maturity: float, sigma: float) -> float:
    """dPrice/dsigma, common to calls and puts."""
    if sigma <= 0.0:
        return 0.0
    df = np.exp(-r * maturity)
    forward = s0 / df
    vol = sigma * np.sqrt(maturity)
    d1 = (np.log(forward / strike) + 0.5 * vol * vol) / vol
    return float(df * forward * np.sqrt(maturity) * np.exp(-0.5 * d1 * d1) / np.sqrt(2.0 * np.pi))


def implied_vol(price: float, s0: float, strike: float, r: float, maturity: float, kind: str) -> float:
    """Invert the Black-Scholes formula for sigma.

    Bracketed bisection down to machine-level interval width, polished by a
    Newton step whenever the vega is meaningful; achieves
    |bs_price(result) - price| <= 1e-10 * s0 for prices inside the band.
    """
    if kind not in ("call", "put"):
        raise DomainError(f"kind must be 'call' or 'put', got {kind!r}")
    lo_price = bs_price(s0, strike, r, maturity, 0.0, kind)
    hi_price = s0 if kind == "call" else strike * np.exp(-r * maturity)
    if price <= lo_price:
        raise InversionError(
            f"price {price:g} at or below intrinsic bound {lo_price:g}", bound=lo_price
        )
    if price >= hi_price:
        raise InversionError(
            f"price {price:g} at or above upper bound {hi_price:g}", bound=hi_price
        )

    lo, hi = _VOL_LO, 1.0
    while bs_price(s0, strike, r, maturity, hi, kind) < price and hi < _VOL_HI:
        hi *= 2.0
    if bs_price(s0, strike, r, maturity, hi, kind) < price:
        raise InversionError(f"price {price:g} not attainable below sigma={_VOL_HI}", bound=hi_price)

    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if bs_price(s0, strike, r, maturity, mid, kind) < price:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    sigma = 0.5 * (lo + hi)
    vega = bs_vega(s0, strike, r, maturity, sigma)
    if vega > 1e-8 * s0:
        for _ in range(3):
            diff = bs_price(s0, strike, r, maturity, sigma, kind) - price
            if abs(diff) <= INVERSION_TOL * s0:
                break
            step = diff / bs_vega(s0, strike, r, maturity, sigma)
            if not np.isfinite(step):
                break
            sigma = min(max(sigma - step, _VOL_LO), _VOL_HI)
    return float(sigma)


@dataclass(frozen=True)
class VolSurfacePoint:
    """One (maturity, strike) cell of an implied-vol smile or surface."""

    maturity: float
    log_strike: float
    strike: float
    price: float
    stderr: float
    iv: float
    valid: bool


def smile_from_batch(batch: PathBatch, maturity: float, log_strikes, s0: float, r: float) -> list[VolSurfacePoint]:
    """Implied-vol smile at one maturity from a simulated batch.

    Each strike is priced on its out-of-the-money side (put below the spot's
    log-forward, call at or above), where the inversion is well conditioned;
    OTM and ITM quotes share the same implied vol by put-call parity.  Points
    whose Monte Carlo price falls outside the arbitrage band are flagged
    invalid rather than raising.
    """
    log_strikes = np.atleast_1d(np.asarray(log_strikes, dtype=float))
    points = []
    for k in log_strikes:
        strike = s0 * np.exp(k)
        kind = "put" if k < r * maturity else "call"
        est = price_european(batch, strike, maturity, r, kind)
        try:
            iv = implied_vol(est.mean, s0, strike, r, maturity, kind)
            valid = True
        except InversionError:
            iv = np.nan
            valid = False
        points.append(
            VolSurfacePoint(
                maturity=maturity, log_strike=float(k), strike=float(strike),
                price=est.mean, stderr=est.stderr, iv=iv, valid=valid,
            )
        )
    return points


def max_rel_error(candidate, benchmark) -> float:
    """max over common valid points of |iv_a - iv_b| / |iv_b|.

    ``benchmark`` supplies the denominator; the metric is intentionally
    asymmetric.  Accepts sequences of VolSurfacePoint (invalid points are
    excluded pairwise) or plain numeric arrays.
    """
    a, va = _as_iv_array(candidate)
    b, vb = _as_iv_array(benchmark)
    if a.shape != b.shape:
        raise DomainError("surfaces must have equal shape")
    ok = va & vb
    if not np.any(ok):
        raise DomainError("no common valid points to compare")
    return float(np.max(np.abs(a[ok] - b[ok]) / np.abs(b[ok])))


def _as_iv_array(obj):
    if len(obj) and isinstance(obj[0], VolSurfacePoint):
        iv = np.array([p.iv for p in obj])
        valid = np.array([p.valid for p in obj], dtype=bool)
        return iv, valid
    iv = np.asarray(obj, dtype=float)
    return iv, np.isfinite(iv)


def write_smile(path, points) -> None:
    """Write smile/surface points as CSV "T,k,strike,price,stderr,iv,valid"."""
    with open(path, "w") as fh:
        fh.write("T,k,strike,price,stderr,iv,valid\n")
        for p in points:
            iv = f"{p.iv:.17g}" if p.valid else "nan"
            fh.write(
                f"{p.maturity:.17g},{p.log_strike:.17g},{p.strike:.17g},"
                f"{p.price:.17g},{p.stderr:.17g},{iv},{int(p.valid)}\n"
            )
