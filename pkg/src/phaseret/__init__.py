"""Discrete phase retrieval: measurement, projections, hybrid iterations and
transversality diagnostics on periodic lattices."""

__version__ = "0.1.0"
