"""Input selection for structural controllability of networked descriptor systems."""

__version__ = "0.1.0"
