"""Value types naming what is done to a micro-world: generations, environments, measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import InvalidGenerationParams

Params = tuple[tuple[str, float], ...]


def freeze_params(params: Mapping[str, float] | Params | None) -> Params:
    if not params:
        return ()
    items = params.items() if isinstance(params, Mapping) else params
    return tuple(sorted((str(k), float(v)) for k, v in items))


def _fmt(params: Params) -> str:
    return ",".join(f"{k}={v:g}" for k, v in params)


@dataclass(frozen=True)
class SpacetimeSupport:
    """Spatial extent ``d_G`` and duration ``t_G - t_0`` of a generation, in simulation units."""

    extent: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        for name in ("extent", "duration"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidGenerationParams(f"spacetime_support.{name}", f"must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class EnvironmentSpec:
    """External conditions (CE) acting on an exemplar between generation and measurement."""

    name: str
    params: Params = ()

    def __post_init__(self):
        for k, v in self.params:
            if not math.isfinite(v):
                raise ValueError(f"environment parameter {k} is not finite")

    @classmethod
    def make(cls, name: str, **params: float) -> EnvironmentSpec:
        return cls(name, freeze_params(params))

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    def __str__(self) -> str:
        return f"{self.name}({_fmt(self.params)})" if self.params else self.name


@dataclass(frozen=True)
class GenerationOp:
    """A reproducible state-generation procedure.

    Equal values denote the same operation and therefore the same hidden
    distribution; the spacetime support is bookkeeping and takes no part in
    equality.  ``components`` is non-empty for a composed generation and
    ``evolution`` lists the ``(environment, dt)`` segments applied after the
    generation proper.
    """

    world_id: str
    label: str
    params: Params = ()
    support: SpacetimeSupport = field(default_factory=SpacetimeSupport, compare=False)
    components: tuple[GenerationOp, ...] = ()
    evolution: tuple[tuple[EnvironmentSpec, float], ...] = ()

    @classmethod
    def make(cls, world_id: str, label: str, support: SpacetimeSupport | None = None, **params: float) -> GenerationOp:
        return cls(world_id, label, freeze_params(params), support or SpacetimeSupport())

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    def param(self, name: str, default: float) -> float:
        return self.p.get(name, default)

    @property
    def ready_time(self) -> float:
        """Time at which the exemplar is available to a measurement, counted from ``t_0``."""
        return self.support.duration + sum(dt for _, dt in self.evolution)

    def __str__(self) -> str:
        return f"G[{self.label}]"


@dataclass(frozen=True)
class MeasurementSpec:
    """One measurement interaction ``Mes(X)``.

    ``label`` names the interaction family (it selects the coding rule),
    ``params`` its settings.  ``name`` is a display alias such as ``sigma_x``.
    """

    label: str
    params: Params = ()
    name: str = field(default="", compare=False)

    @classmethod
    def make(cls, label: str, name: str = "", **params: float) -> MeasurementSpec:
        return cls(label, freeze_params(params), name)

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def display(self) -> str:
        if self.name:
            return self.name
        return f"{self.label}({_fmt(self.params)})" if self.params else self.label


# -- JSON forms ----------------------------------------------------------------


def generation_to_dict(g: GenerationOp) -> dict:
    return {
        "world_id": g.world_id,
        "label": g.label,
        "params": dict(g.params),
        "support": {"extent": g.support.extent, "duration": g.support.duration},
        "components": [generation_to_dict(c) for c in g.components],
        "evolution": [{"environment": {"name": e.name, "params": dict(e.params)}, "dt": dt} for e, dt in g.evolution],
    }


def generation_from_dict(d: Mapping) -> GenerationOp:
    support = d.get("support") or {}
    return GenerationOp(
        d["world_id"],
        d["label"],
        freeze_params(d.get("params")),
        SpacetimeSupport(float(support.get("extent", 0.0)), float(support.get("duration", 0.0))),
        tuple(generation_from_dict(c) for c in d.get("components", ())),
        tuple(
            (EnvironmentSpec(s["environment"]["name"], freeze_params(s["environment"].get("params"))), float(s["dt"]))
            for s in d.get("evolution", ())
        ),
    )


def measurement_to_dict(m: MeasurementSpec) -> dict:
    return {"label": m.label, "name": m.name, "params": dict(m.params)}


def measurement_from_dict(d: Mapping) -> MeasurementSpec:
    return MeasurementSpec(d["label"], freeze_params(d.get("params")), d.get("name", ""))
