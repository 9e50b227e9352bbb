"""Boltzmann sampling of the classical XY model with simulated networks of
non-degenerate optical parametric oscillators."""

__version__ = "0.1.0"
