"""Chernoff approximation of subordinate semigroups."""

__version__ = "0.1.0"
