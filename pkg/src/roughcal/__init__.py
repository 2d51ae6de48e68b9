"""Rough Bergomi Monte Carlo engine with Wasserstein-1 calibration."""

__version__ = "0.1.0"
