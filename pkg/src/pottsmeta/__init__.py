"""Metastability toolkit for the non-reversible three-spin mean-field Potts model."""

__version__ = "0.1.0"
