"""Multimode squeezing from pulsed SPDC: simulation and pump-shaping optimization."""

__version__ = "0.1.0"
