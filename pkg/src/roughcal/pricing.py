"""Discounted Monte Carlo price estimates from simulated path batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .paths import PathBatch

_EUROPEAN_KINDS = ("call", "put")
_BARRIER_KINDS = ("down-and-out-put", "up-and-out-call", "down-and-in-put")


@dataclass(frozen=True)
class Contract:
    """A European or barrier option contract."""

    kind: str
    strike: float
    maturity: float
    barrier: float | None = None

    def __post_init__(self):
        if self.kind not in _EUROPEAN_KINDS + _BARRIER_KINDS:
            raise DomainError(f"unknown contract kind {self.kind!r}")
        if self.strike <= 0.0:
            raise DomainError("strike must be positive")
        if self.maturity <= 0.0:
            raise DomainError("maturity must be positive")
        if self.kind in _BARRIER_KINDS:
            if self.barrier is None or self.barrier < 0.0:
                raise DomainError("barrier contracts need a non-negative barrier level")
        elif self.barrier is not None:
            raise DomainError("vanilla contracts take no barrier level")


@dataclass(frozen=True)
class PriceEstimate:
    """Monte Carlo price with its standard error."""

    mean: float
    stderr: float
    m: int


def _maturity_index(batch: PathBatch, maturity: float) -> int:
    idx = np.nonzero(np.isclose(batch.maturities, maturity, rtol=1e-12, atol=1e-12))[0]
    if idx.size == 0:
        raise DomainError(
            f"maturity {maturity:g} not recorded in batch "
            f"(has {np.array2string(batch.maturities)})"
        )
    return int(idx[0])


def _estimate(payoff: np.ndarray, discount: float) -> PriceEstimate:
    m = payoff.size
    mean = float(discount * payoff.mean())
    if m > 1:
        stderr = float(discount * payoff.std(ddof=1) / np.sqrt(m))
    else:
        stderr = 0.0
    return PriceEstimate(mean=mean, stderr=stderr, m=m)


def price_european(batch: PathBatch, strike: float, maturity: float, r: float, kind: str) -> PriceEstimate:
    """Discounted mean of the vanilla payoff at a recorded maturity."""
    if kind not in _EUROPEAN_KINDS:
        raise DomainError(f"kind must be 'call' or 'put', got {kind!r}")
    if strike < 0.0:
        raise DomainError("strike must be non-negative")
    st = batch.terminals[_maturity_index(batch, maturity)]
    if kind == "call":
        payoff = np.maximum(st - strike, 0.0)
    else:
        payoff = np.maximum(strike - st, 0.0)
    return _estimate(payoff, np.exp(-r * maturity))


def price_barrier(batch: PathBatch, contract: Contract, r: float = 0.0) -> PriceEstimate:
    """Discounted mean of a discretely monitored barrier payoff.

    Knock-out conditions use strict inequalities over grid points: a
    down-and-out put survives iff min S > B, an up-and-out call iff max S < B.
    """
    if contract.kind not in _BARRIER_KINDS:
        raise DomainError(f"not a barrier contract: {contract.kind!r}")
    j = _maturity_index(batch, contract.maturity)
    st = batch.terminals[j]
    if contract.kind == "down-and-out-put":
        alive = batch.running_min[j] > contract.barrier
        payoff = np.maximum(contract.strike - st, 0.0) * alive
    elif contract.kind == "down-and-in-put":
        hit = batch.running_min[j] <= contract.barrier
        payoff = np.maximum(contract.strike - st, 0.0) * hit
    else:
        alive = batch.running_max[j] < contract.barrier
        payoff = np.maximum(st - contract.strike, 0.0) * alive
    return _estimate(payoff, np.exp(-r * contract.maturity))


def tolerance_epsilon(bids, asks) -> float:
    """Mean absolute bid-ask spread, the calibration stopping tolerance."""
    bids = np.asarray(bids, dtype=float)
    asks = np.asarray(asks, dtype=float)
    if bids.shape != asks.shape or bids.ndim != 1 or bids.size == 0:
        raise DomainError("bids and asks must be equally long non-empty sequences")
    return float(np.mean(np.abs(bids - asks)))
