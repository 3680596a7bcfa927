"""Certificates for Rhaly matrices acting on weighted Frechet sequence spaces."""

__version__ = "0.1.0"
