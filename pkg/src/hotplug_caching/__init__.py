"""Coded caching for systems with offline users, with and without demand privacy.

Exact GF(q) implementations of the placement/delivery schemes, the converse
bounds, and the exhaustive verifiers that certify them at desk scale.
"""

__version__ = "0.1.0"

from .model import DemandVector, FileLibrary, SystemParams, TradeoffPoint  # noqa: F401
