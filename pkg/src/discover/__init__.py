"""Automated tabular discovery: AutoML plus validated subgroup patterns."""

__version__ = "0.1.0"
