"""Scheme interface: placement, delivery and per-user decoding.

Decoders receive only what a real user would hold: the public construction
(placement meta), their own cache and local randomness, the broadcast
transcript and their own demand. Server-only state lives in placement.server
and is never passed to decode().
"""

from __future__ import annotations

import abc
from fractions import Fraction

import numpy as np

from ..errors import UnsupportedParams
from ..model import (
    DeliveryTranscript,
    DemandVector,
    FileLibrary,
    PlacementOutcome,
    SystemParams,
    TradeoffPoint,
)


def binom(a: int, b: int) -> int:
    """Binomial coefficient, zero unless a >= b >= 0."""
    if a >= b >= 0:
        import math

        return math.comb(a, b)
    return 0


class Scheme(abc.ABC):
    name: str = ""
    is_private: bool = False

    def supports(self, params: SystemParams) -> bool:
        try:
            self.validate(params)
        except UnsupportedParams:
            return False
        return True

    @abc.abstractmethod
    def validate(self, params: SystemParams) -> None:
        """Raise UnsupportedParams (or a subclass) when params are out of range."""

    @abc.abstractmethod
    def subpacketization(self, params: SystemParams) -> int:
        ...

    def b_symbols(self, params: SystemParams) -> int:
        return self.subpacketization(params) * params.b_factor

    @abc.abstractmethod
    def declared_point(self, params: SystemParams) -> TradeoffPoint:
        """The theorem's (M, R) pair for these exact parameters."""

    @abc.abstractmethod
    def place(
        self,
        params: SystemParams,
        library: FileLibrary,
        seed: int = 0,
        randomness: dict[int, object] | None = None,
    ) -> PlacementOutcome:
        ...

    @abc.abstractmethod
    def deliver(
        self, params: SystemParams, placement: PlacementOutcome, demand: DemandVector
    ) -> DeliveryTranscript:
        ...

    @abc.abstractmethod
    def decode(
        self,
        params: SystemParams,
        meta: dict,
        user: int,
        cache: np.ndarray,
        user_meta: dict,
        transcript: DeliveryTranscript,
        demanded_file: int,
        ctx=None,
    ) -> np.ndarray:
        ...

    def make_decode_context(self, params: SystemParams, meta: dict, transcript):
        """Optional shared per-transcript state (message reconstruction cache)."""
        return None

    def randomness_space(self, params: SystemParams):
        """Per-user list of possible local-randomness values, or None if none."""
        return None

    def min_field(self, params: SystemParams) -> int:
        """Smallest modulus the construction needs (before primality)."""
        return 2


def declared_memory(placement: PlacementOutcome) -> Fraction:
    sizes = {placement.memory_fraction(u) for u in placement.caches}
    if len(sizes) != 1:
        raise AssertionError(f"asymmetric cache sizes: {sizes}")
    return sizes.pop()
