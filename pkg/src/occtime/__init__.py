"""Occupation-time moments of the randomly accelerated particle."""

__version__ = "0.1.0"
