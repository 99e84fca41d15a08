"""Concrete matrix realizations of commuting block towers and their two-generator construction."""

__version__ = "0.1.0"
