"""Geodesic blocking laboratory."""

__version__ = "0.1.0"
