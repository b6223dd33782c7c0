"""Grover-search QRL scheduling simulator for multi-user massive-MIMO downlinks."""

__version__ = "0.1.0"
