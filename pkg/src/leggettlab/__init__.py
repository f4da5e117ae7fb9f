"""Numerical laboratory for Leggett-type inequalities in local hidden-variable models."""

__version__ = "0.1.0"
