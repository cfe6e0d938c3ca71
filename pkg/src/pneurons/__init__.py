"""Simulator of modular p-bits and configurable p-neurons."""

__version__ = "0.1.0"
