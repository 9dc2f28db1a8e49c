"""Discrete fractional Musielak-Sobolev toolkit."""

__version__ = "0.1.0"
