"""Built-in micro-worlds and the registry through which they are addressed."""

from __future__ import annotations

from .base import (
    DEFAULT_BINS,
    HiddenExemplar,
    World,
    WorldHandle,
    WorldRegistry,
    WorldSpec,
    generate_exemplar,
    measure_exemplar,
    registry,
    resolve,
    view_catalog,
)
from .classical import ClassicalDie, CoinPair
from .spin import InfluenceContrast, Qubit, SingletPair, pair_spin, pauli
from .wave import DoubleSlit, FreeParticle
from ..errors import InvalidWorldSpec

KINDS: dict[str, type[World]] = {
    cls.kind: cls
    for cls in (ClassicalDie, CoinPair, Qubit, SingletPair, FreeParticle, DoubleSlit, InfluenceContrast)
}


def build_world(spec: WorldSpec, world_id: str | None = None) -> World:
    """Instantiate (without registering) the world described by ``spec``."""
    try:
        cls = KINDS[spec.kind]
    except KeyError:
        raise InvalidWorldSpec(f"unknown world kind {spec.kind!r}; known: {sorted(KINDS)}") from None
    return cls(spec, world_id)


def register_world(spec: WorldSpec, world_id: str | None = None) -> World:
    """Build and register a world; re-registering an identical spec returns the existing handle."""
    return registry.add(build_world(spec, world_id))


__all__ = [
    "DEFAULT_BINS",
    "KINDS",
    "ClassicalDie",
    "CoinPair",
    "DoubleSlit",
    "FreeParticle",
    "HiddenExemplar",
    "InfluenceContrast",
    "Qubit",
    "SingletPair",
    "World",
    "WorldHandle",
    "WorldRegistry",
    "WorldSpec",
    "build_world",
    "generate_exemplar",
    "measure_exemplar",
    "pair_spin",
    "pauli",
    "register_world",
    "registry",
    "resolve",
    "view_catalog",
]
