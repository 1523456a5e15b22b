"""Reconstruction of complex polynomial dynamics from real-orbit data."""

__version__ = "0.1.0"
