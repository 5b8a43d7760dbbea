"""Compile hyperproperty verification problems to constrained Horn clauses."""

__version__ = "0.1.0"
