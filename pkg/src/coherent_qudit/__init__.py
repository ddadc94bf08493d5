"""Coherent-state optical qudits: ideal qudit engine plus truncated-Fock simulation."""

__version__ = "0.1.0"
