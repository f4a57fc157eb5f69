"""
Experiments built on the numerical engine, and the command registry that
exposes them on the command line.
"""

from .fitting import DecaySeries, FitResult, fit_poly_log
from .registry import command, command_registry

__all__ = ["DecaySeries", "FitResult", "command", "command_registry", "fit_poly_log"]
