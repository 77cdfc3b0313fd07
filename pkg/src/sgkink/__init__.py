"""Pseudospectral laboratory for odd perturbations of the sine-Gordon kink."""

__version__ = "0.1.0"
