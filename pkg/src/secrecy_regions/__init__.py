"""Secrecy capacity regions of multi-receiver wiretap channels."""

__version__ = "0.1.0"
