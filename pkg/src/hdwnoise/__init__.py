"""White-noise tests for high-dimensional time series."""

__version__ = "0.1.0"
