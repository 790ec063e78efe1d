"""Finite-blocklength analysis and simulation toolkit for the AWGN channel."""

__version__ = "0.1.0"
