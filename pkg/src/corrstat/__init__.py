"""Stationarity tests for correlation panels and their portfolio impact."""

__version__ = "0.1.0"
