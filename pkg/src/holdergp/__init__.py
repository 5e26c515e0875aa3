"""Hölder regularity of centered Gaussian processes from their covariance."""

__version__ = "0.1.0"
