"""Simulation and analytic toolkit for restart and checkpointing recovery."""

__version__ = "0.1.0"
