"""Simulation and control of the coupled Schrödinger-KdV system on the torus."""

__version__ = "0.1.0"
