"""Sparse longitudinal representations (SLR) and their weighted bagging (WB-SLR)."""

__version__ = "0.1.0"
