"""Integrating multipliers and action functionals for systems of ODEs."""
__version__ = "0.1.0"
