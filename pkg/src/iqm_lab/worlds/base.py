"""Hidden micro-worlds and the two acts that touch them: generation and measurement.

A world never hands out its hidden state.  Callers obtain an exemplar from a
:class:`~iqm_lab.ops.GenerationOp` and may consume it exactly once in a
measurement interaction, which returns only marks.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..coding import CodingRule
from ..errors import (
    ExemplarAlreadyConsumed,
    IncompatibleMeasurementSpec,
    InvalidGenerationParams,
    InvalidWorldSpec,
    NotComposable,
    UnknownWorld,
    UnsupportedEnvironment,
)
from ..marks import MarkBatch, MarkSet
from ..ops import EnvironmentSpec, GenerationOp, MeasurementSpec, Params, SpacetimeSupport, freeze_params
from ..rng import GEN_DRAWS, MES_DRAWS

DEFAULT_BINS = 32


@dataclass(frozen=True)
class WorldSpec:
    kind: str
    params: Params = ()

    @classmethod
    def make(cls, kind: str, **params: float) -> WorldSpec:
        return cls(kind, freeze_params(params))

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)


class HiddenExemplar:
    """One exemplar of a micro-state; its payload is readable only by its world."""

    __slots__ = ("exemplar_id", "origin", "_hidden", "_consumed")

    def __init__(self, exemplar_id: str, origin: GenerationOp, hidden: np.ndarray):
        self.exemplar_id = exemplar_id
        self.origin = origin
        self._hidden = hidden
        self._consumed = False

    @property
    def consumed(self) -> bool:
        return self._consumed

    def __repr__(self) -> str:
        state = "consumed" if self._consumed else "fresh"
        return f"HiddenExemplar({self.exemplar_id}, {self.origin}, {state})"


def jitter(u: np.ndarray) -> np.ndarray:
    """Offset of a mark inside its zone, kept away from the zone edges."""
    return 0.1 + 0.8 * u


class World:
    """Base class of the built-in worlds.

    Subclasses declare their parameters and implement ``_prepare`` (hidden
    states from generation uniforms) and ``_emit`` (marks from hidden states
    and measurement uniforms), both vectorized over successions.
    """

    kind: ClassVar[str] = ""
    spec_defaults: ClassVar[dict[str, float]] = {}
    gen_defaults: ClassVar[dict[str, float]] = {}
    mes_defaults: ClassVar[dict[str, dict[str, float]]] = {}
    environments: ClassVar[frozenset[str]] = frozenset()
    is_quantum: ClassVar[bool] = False

    def __init__(self, spec: WorldSpec, world_id: str | None = None):
        if spec.kind != self.kind:
            raise InvalidWorldSpec(f"spec of kind {spec.kind!r} given to a {self.kind} world")
        unknown = set(spec.p) - set(self.spec_defaults)
        if unknown:
            raise InvalidWorldSpec(f"{self.kind}: unknown parameter(s) {sorted(unknown)}")
        self.spec = spec
        self.world_id = world_id or spec.kind
        self.params = {**self.spec_defaults, **spec.p}
        for k, v in self.params.items():
            if not math.isfinite(v):
                raise InvalidWorldSpec(f"{self.kind}.{k} must be finite")
        self._validate()

    def _validate(self) -> None:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.world_id!r})"

    # -- generation ----------------------------------------------------------

    def generation(self, label: str = "G", support: SpacetimeSupport | None = None, **params: float) -> GenerationOp:
        g = GenerationOp.make(self.world_id, label, support, **params)
        self.check_generation(g)
        return g

    def default_generation(self) -> GenerationOp:
        return self.generation("G")

    def gen_params(self, g: GenerationOp) -> dict[str, float]:
        return {**self.gen_defaults, **g.p}

    def check_generation(self, g: GenerationOp) -> None:
        if g.world_id != self.world_id:
            raise UnknownWorld(f"generation {g} belongs to world {g.world_id!r}, not {self.world_id!r}")
        for k, v in g.params:
            if k not in self.gen_defaults:
                raise InvalidGenerationParams(k, f"not a parameter of {self.kind} generations")
            if not math.isfinite(v):
                raise InvalidGenerationParams(k, "must be finite")
        self._check_gen(self.gen_params(g))
        for env, dt in g.evolution:
            if env.name not in self.environments:
                raise UnsupportedEnvironment(f"{self.kind} cannot evolve under {env}")
            if not (math.isfinite(dt) and dt >= 0):
                raise InvalidGenerationParams("dt", f"evolution duration must be >= 0, got {dt}")

    def _check_gen(self, p: dict[str, float]) -> None:
        pass

    def supports(self, ce: EnvironmentSpec) -> bool:
        return ce.name in self.environments

    def compose(self, g1: GenerationOp, g2: GenerationOp, label: str | None = None) -> GenerationOp:
        raise NotComposable(f"{self.kind} worlds have no composed generations")

    # -- measurement ---------------------------------------------------------

    def measurement_params(self, mes: MeasurementSpec) -> dict[str, float]:
        if mes.label not in self.mes_defaults:
            raise IncompatibleMeasurementSpec(f"{mes.label!r} is not a measurement of {self.kind} worlds")
        defaults = self.mes_defaults[mes.label]
        unknown = set(mes.p) - set(defaults)
        if unknown:
            raise IncompatibleMeasurementSpec(f"{mes.label}: unknown setting(s) {sorted(unknown)}")
        return {**defaults, **mes.p}

    def compatibility_class(self, mes: MeasurementSpec) -> str:
        """Class id shared by exactly the specs realizable by one interaction on one exemplar."""
        p = self.measurement_params(mes)
        return self._classify(mes.label, p)

    def _classify(self, label: str, p: dict[str, float]) -> str:
        return label

    def catalog(self) -> list[tuple[MeasurementSpec, str]]:
        raise NotImplementedError

    def default_rule(self, mes: MeasurementSpec, g: GenerationOp | None = None, bins: int | None = None) -> CodingRule:
        raise NotImplementedError

    def envelope(self, g: GenerationOp, mes: MeasurementSpec) -> tuple[float, float]:
        """Spatial extent and duration (from the end of generation) of the measurement domain."""
        raise NotImplementedError

    # -- vectorized core -----------------------------------------------------

    def sample_batch(self, g: GenerationOp, mes: MeasurementSpec, u_gen: np.ndarray, u_mes: np.ndarray) -> MarkBatch:
        """Generate and measure ``len(u_gen)`` fresh exemplars in one go."""
        self.check_generation(g)
        self.compatibility_class(mes)
        hidden = self._prepare(g, np.atleast_2d(u_gen))
        return self._emit(g, hidden, mes, np.atleast_2d(u_mes))

    def _prepare(self, g: GenerationOp, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _emit(self, g: GenerationOp, hidden: np.ndarray, mes: MeasurementSpec, u: np.ndarray) -> MarkBatch:
        raise NotImplementedError


# -- registry ------------------------------------------------------------------


class WorldRegistry:
    """Lookup of world handles by id.  Handles are immutable once registered."""

    def __init__(self):
        self._worlds: dict[str, World] = {}
        self._lock = threading.Lock()

    def add(self, world: World) -> World:
        with self._lock:
            existing = self._worlds.get(world.world_id)
            if existing is not None:
                if existing.spec != world.spec or type(existing) is not type(world):
                    raise InvalidWorldSpec(f"world id {world.world_id!r} is already registered with another spec")
                return existing
            self._worlds[world.world_id] = world
            return world

    def get(self, world_id: str) -> World:
        try:
            return self._worlds[world_id]
        except KeyError:
            raise UnknownWorld(f"no world registered as {world_id!r}") from None

    def __contains__(self, world_id: str) -> bool:
        return world_id in self._worlds

    def __iter__(self):
        return iter(list(self._worlds.values()))


registry = WorldRegistry()

WorldHandle = World | str


def resolve(world: WorldHandle) -> World:
    return registry.get(world) if isinstance(world, str) else world


_exemplar_ids = itertools.count(1)


def generate_exemplar(world: WorldHandle, g: GenerationOp, rng: np.random.Generator) -> HiddenExemplar:
    """Realize ``g`` once, drawing the generation uniforms from ``rng``."""
    w = resolve(world)
    w.check_generation(g)
    hidden = w._prepare(g, rng.random(GEN_DRAWS)[None, :])
    return HiddenExemplar(f"{w.world_id}#{next(_exemplar_ids)}", g, hidden)


def measure_exemplar(world: WorldHandle, ex: HiddenExemplar, mes: MeasurementSpec, rng: np.random.Generator) -> MarkSet:
    """Consume ``ex`` in the interaction ``mes`` and return the marks it leaves."""
    w = resolve(world)
    if ex.consumed:
        raise ExemplarAlreadyConsumed(f"{ex.exemplar_id} was already measured")
    if ex.origin.world_id != w.world_id:
        raise UnknownWorld(f"{ex.exemplar_id} was not generated in {w.world_id!r}")
    w.compatibility_class(mes)
    ex._consumed = True
    batch = w._emit(ex.origin, ex._hidden, mes, rng.random(MES_DRAWS)[None, :])
    return batch.markset(0)


def view_catalog(world: WorldHandle) -> list[tuple[MeasurementSpec, str]]:
    return resolve(world).catalog()
