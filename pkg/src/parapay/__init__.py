"""Expectile-based design and evaluation of parametric insurance payouts."""

__version__ = "0.1.0"
