"""Numerical checks for regular unitary dilations of commuting semigroup families."""
__version__ = "0.1.0"
