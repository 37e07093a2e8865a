"""Entanglement of two spinor BECs through a common cavity mode."""

__version__ = "0.1.0"
