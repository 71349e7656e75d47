"""Noncommutative rational functions: realizations, pencil extensions,
domain widening, and positivity certificates on free spectrahedra."""

__version__ = "0.1.0"
