"""Coupled generalized multiscale finite elements for quasi-static thermoelasticity."""

__version__ = "0.1.0"
