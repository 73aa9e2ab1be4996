"""Euler schemes for SDEs driven by stable-like Levy processes."""

__version__ = "0.1.0"
