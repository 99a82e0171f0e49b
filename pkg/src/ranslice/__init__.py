"""Isolated RAN slice placement: MILP model, exact search, first-fit baseline and validation."""

__version__ = "0.1.0"
