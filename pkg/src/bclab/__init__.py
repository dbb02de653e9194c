"""Contaminated Borel-Cantelli events and small partial maxima, simulated."""

__version__ = "0.1.0"
