"""Dyadic cube systems on finite doubling metric spaces."""
__version__ = "0.1.0"
