"""Monotone estimators and reshaped bootstrap inference."""

__version__ = "0.1.0"
