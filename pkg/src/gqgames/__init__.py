"""Contextuality games on generalized quadrangles of multi-qubit Pauli operators."""

__version__ = "0.1.0"
