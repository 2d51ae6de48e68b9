"""Empirical Wasserstein-1 distance and the calibration losses built on it.

For equal-size one-dimensional samples the W1 distance between the empirical
measures is exact and cheap: sort both samples and average the absolute gaps
between order statistics, O(m log m) per evaluation.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ParseError


def empirical_w1(xs, ys) -> float:
    """(1/m) sum_i |X_(i) - Y_(i)| over sorted samples of equal size m."""
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or xs.size != ys.size:
        raise DomainError("need two non-empty samples of equal size")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise DomainError("samples must be finite")
    return float(np.mean(np.abs(np.sort(xs) - np.sort(ys))))


def w1_loss(model_samples: dict, market_samples: dict) -> float:
    """Mean over maturities of the per-maturity empirical W1 distance.

    Both arguments map maturity -> sample array; the maturity sets must match.
    """
    if set(model_samples) != set(market_samples):
        raise DomainError("model and market maturities do not match")
    if not model_samples:
        raise DomainError("need at least one maturity")
    return float(
        np.mean([empirical_w1(model_samples[t], market_samples[t]) for t in model_samples])
    )


def mse_loss(model_prices, market_prices) -> float:
    """(1/M) sum_j (P_j - P_j_mkt)^2."""
    a = np.asarray(model_prices, dtype=float).ravel()
    b = np.asarray(market_prices, dtype=float).ravel()
    if a.size == 0 or a.size != b.size:
        raise DomainError("need two non-empty price vectors of equal length")
    return float(np.mean((a - b) ** 2))


def write_market_samples(path, samples: dict) -> None:
    """Write per-maturity samples as CSV rows "maturity,value"."""
    with open(path, "w") as fh:
        fh.write("maturity,value\n")
        for t in sorted(samples):
            for v in np.asarray(samples[t], dtype=float).ravel():
                fh.write(f"{t:.17g},{v:.17g}\n")


def read_market_samples(path) -> dict:
    """Read a market-sample CSV written by :func:`write_market_samples`."""
    out: dict[float, list] = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "maturity,value":
            raise ParseError(f"expected header 'maturity,value', got {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected two comma-separated values", line=lineno)
            try:
                t, v = float(parts[0]), float(parts[1])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric entry", line=lineno) from None
            out.setdefault(t, []).append(v)
    return {t: np.array(vs) for t, vs in out.items()}
