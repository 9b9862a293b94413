"""Hitting- and return-time statistics for random dynamical systems on the circle."""

__version__ = "0.1.0"
