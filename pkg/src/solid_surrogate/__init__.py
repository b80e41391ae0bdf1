"""Probabilistic full-field surrogate for nonlinear solid mechanics."""

__version__ = "0.1.0"
