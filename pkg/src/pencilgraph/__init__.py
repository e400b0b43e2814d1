"""Quadratic pencils on a star graph with a loop."""
__version__ = "0.1.0"
