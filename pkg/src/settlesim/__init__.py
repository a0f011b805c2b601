"""Permissioned settlement ledger with a deterministic multi-node simulator."""

__version__ = "0.1.0"
