"""Vorticity iteration solver for the periodic 3-D Navier-Stokes equations,
with Monte Carlo heat-kernel estimators and Gaussian bound checks."""

__version__ = "0.1.0"
