"""Ballast-water invasion risk on a higher-order shipping network, compliance costs, and inequality metrics."""

__version__ = "0.1.0"
