"""Autofocus search algorithms, focus measures and benchmarking for telescope imaging."""

__version__ = "0.1.0"
