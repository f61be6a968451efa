"""Federated hyperdimensional learning with DP noise, and its energy-optimal configuration."""

__version__ = "0.1.0"
