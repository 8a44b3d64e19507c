"""Traveling fronts of a reactive Boussinesq system in an infinite channel."""

__version__ = "0.1.0"
