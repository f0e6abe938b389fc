"""Objective label channels, group fairness metrics and Pareto ensemble search."""

__version__ = "0.1.0"
