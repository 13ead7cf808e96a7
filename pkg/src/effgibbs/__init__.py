"""Pinched thermal states, their generators and thermodynamic losses under dephasing to H0 eigenspaces."""

__version__ = "0.1.0"
