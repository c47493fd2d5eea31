"""Counting, sieve and circle-method numerics for almost-prime points on
systems of homogeneous forms."""

__version__ = "0.1.0"
