"""Simple mechanisms for item-independent multi-item auctions.

The package builds the lift-and-round LP relaxation over marginal reduced
forms, extracts item prices for a two-part tariff, searches rationed posted
prices, and checks the structural guarantees against brute-force oracles on
small instances.
"""

from __future__ import annotations

from .config import VERSION as __version__

__all__ = ["__version__"]
