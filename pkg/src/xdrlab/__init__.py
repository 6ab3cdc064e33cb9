"""Desk-scale multi-domain SDN routing laboratory."""

__version__ = "0.1.0"
