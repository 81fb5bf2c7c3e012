"""Coding rules: the map from mark space-time regions to exactly one spectrum value.

Regions are axis-aligned, half-open space-time boxes ``[lo, hi)`` with one
box per expected mark.  A mark set codes to spectrum index ``j`` when every
one of its marks falls inside the corresponding box of a region bound to
``j``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import AmbiguousCoding, NonPositiveFlightTime, UncodableMarkSet
from .marks import Mark, MarkBatch, MarkSet
from .rng import MES_DRAWS, GEN_DRAWS, derive_key, succession_uniforms

if TYPE_CHECKING:
    from .ops import GenerationOp, MeasurementSpec
    from .worlds import World

INF = math.inf
AXES = {"x": 0, "y": 1, "z": 2, "t": 3}
UNCODABLE = -1
AMBIGUOUS = -2

Value = float | tuple[float, ...]


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float, float] = (-INF, -INF, -INF, -INF)
    hi: tuple[float, float, float, float] = (INF, INF, INF, INF)

    def __post_init__(self):
        if len(self.lo) != 4 or len(self.hi) != 4:
            raise ValueError("boxes are 4-dimensional")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo} .. {self.hi}")

    def contains(self, coord: Sequence[float]) -> bool:
        return all(a <= c < b for a, c, b in zip(self.lo, coord, self.hi))

    def intersects(self, other: Box) -> bool:
        return all(max(a, c) < min(b, d) for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def restrict(self, axis: str, lo: float, hi: float) -> Box:
        k = AXES[axis]
        new_lo, new_hi = list(self.lo), list(self.hi)
        new_lo[k], new_hi[k] = lo, hi
        return Box(tuple(new_lo), tuple(new_hi))


@dataclass(frozen=True)
class Region:
    region_id: str
    boxes: tuple[Box, ...]
    index: int


@dataclass(frozen=True)
class SpectrumValue:
    index: int
    value: Value
    label: str

    @property
    def is_scalar(self) -> bool:
        return not isinstance(self.value, tuple)


@dataclass(frozen=True)
class CodingRule:
    measurement_label: str
    regions: tuple[Region, ...]
    spectrum: tuple[SpectrumValue, ...]
    _lo: np.ndarray = field(init=False, repr=False, compare=False)
    _hi: np.ndarray = field(init=False, repr=False, compare=False)
    _index: np.ndarray = field(init=False, repr=False, compare=False)
    _split: tuple | None = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.spectrum:
            raise ValueError("spectrum must be non-empty")
        if [s.index for s in self.spectrum] != list(range(1, len(self.spectrum) + 1)):
            raise ValueError("spectrum indices must be contiguous 1..k")
        if not self.regions:
            raise ValueError("a coding rule needs at least one region")
        m = len(self.regions[0].boxes)
        for r in self.regions:
            if len(r.boxes) != m:
                raise ValueError(f"region {r.region_id} has {len(r.boxes)} boxes, expected {m}")
            if not 1 <= r.index <= len(self.spectrum):
                raise ValueError(f"region {r.region_id} bound to unknown spectrum index {r.index}")
        lo = np.array([[b.lo for b in r.boxes] for r in self.regions], dtype=float)
        hi = np.array([[b.hi for b in r.boxes] for r in self.regions], dtype=float)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)
        object.__setattr__(self, "_index", np.array([r.index for r in self.regions]))
        object.__setattr__(self, "_split", _find_split_axis(lo, hi))

    @property
    def marks_expected(self) -> int:
        return self._lo.shape[1]

    def value(self, index: int) -> SpectrumValue:
        return self.spectrum[index - 1]

    def to_dict(self) -> dict:
        def num(v):
            return None if math.isinf(v) else v

        return {
            "measurement_label": self.measurement_label,
            "spectrum": [
                {"index": s.index, "value": list(s.value) if isinstance(s.value, tuple) else s.value, "label": s.label}
                for s in self.spectrum
            ],
            "regions": [
                {
                    "region_id": r.region_id,
                    "index": r.index,
                    "boxes": [{"lo": [num(v) for v in b.lo], "hi": [num(v) for v in b.hi]} for b in r.boxes],
                }
                for r in self.regions
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> CodingRule:
        def lo_num(v):
            return -INF if v is None else float(v)

        def hi_num(v):
            return INF if v is None else float(v)

        spectrum = tuple(
            SpectrumValue(
                int(s["index"]),
                tuple(float(x) for x in s["value"]) if isinstance(s["value"], list) else float(s["value"]),
                str(s["label"]),
            )
            for s in d["spectrum"]
        )
        regions = tuple(
            Region(
                str(r["region_id"]),
                tuple(Box(tuple(lo_num(v) for v in b["lo"]), tuple(hi_num(v) for v in b["hi"])) for b in r["boxes"]),
                int(r["index"]),
            )
            for r in d["regions"]
        )
        return cls(str(d["measurement_label"]), regions, spectrum)


def _find_split_axis(lo: np.ndarray, hi: np.ndarray):
    """Find a (mark, axis) along which all region intervals are pairwise disjoint.

    When one exists, each coordinate can hit at most one region on that axis,
    so a sorted search finds the only candidate region.
    """
    n_regions, m, _ = lo.shape
    for k in range(m):
        for d in range(4):
            order = np.argsort(lo[:, k, d], kind="stable")
            a, b = lo[order, k, d], hi[order, k, d]
            if n_regions == 1 or np.all(b[:-1] <= a[1:]):
                return k, d, order, a, b
    return None


def code_batch(rule: CodingRule, batch: MarkBatch) -> np.ndarray:
    """Spectrum positions (``index - 1``) per succession; UNCODABLE or AMBIGUOUS on failure."""
    if batch.measurement_label != rule.measurement_label:
        raise ValueError(f"rule for {rule.measurement_label!r} applied to marks of {batch.measurement_label!r}")
    n = len(batch)
    if batch.coords.shape[1] != rule.marks_expected:
        return np.full(n, UNCODABLE, dtype=np.int64)
    c = batch.coords
    if rule._split is not None:
        k, d, order, a, b = rule._split
        pos = np.searchsorted(a, c[:, k, d], side="right") - 1
        ok = pos >= 0
        pos = np.clip(pos, 0, None)
        cand = order[pos]
        inside = np.all((rule._lo[cand] <= c) & (c < rule._hi[cand]), axis=(1, 2))
        return np.where(ok & inside, rule._index[cand] - 1, UNCODABLE).astype(np.int64)
    out = np.full(n, UNCODABLE, dtype=np.int64)
    for r in range(len(rule.regions)):
        inside = np.all((rule._lo[r] <= c) & (c < rule._hi[r]), axis=(1, 2))
        j = rule._index[r] - 1
        clash = inside & (out >= 0) & (out != j)
        out = np.where(inside & (out == UNCODABLE), j, out)
        out[clash] = AMBIGUOUS
    return out


def code(rule: CodingRule, ms: MarkSet) -> SpectrumValue:
    """Map one mark set to its unique spectrum value."""
    if ms.measurement_label != rule.measurement_label:
        raise ValueError(f"rule for {rule.measurement_label!r} applied to marks of {ms.measurement_label!r}")
    if len(ms.marks) != rule.marks_expected:
        raise UncodableMarkSet(f"expected {rule.marks_expected} marks, got {len(ms.marks)}")
    hits = {
        r.index
        for r in rule.regions
        if all(box.contains(mark.coord) for box, mark in zip(r.boxes, ms.marks))
    }
    if not hits:
        raise UncodableMarkSet(f"no region of {rule.measurement_label!r} holds marks {[m.coord for m in ms.marks]}")
    if len(hits) > 1:
        raise AmbiguousCoding(f"marks fall in regions of spectrum indices {sorted(hits)}")
    return rule.value(hits.pop())


def tof_momentum(impact: Mark, t0: float, chrono: Mark, mass: float, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Time-of-flight momentum ``m * d / (t_n - t0)``.

    ``d`` is the displacement of the impact from the generation region,
    ``t_n`` the time read on the chronometer mark.
    """
    if not mass > 0:
        raise ValueError(f"mass must be > 0, got {mass}")
    dt = chrono.coord[3] - t0
    if not dt > 0:
        raise NonPositiveFlightTime(f"flight time {dt} is not positive")
    d = np.asarray(impact.coord[:3], dtype=float) - np.asarray(origin, dtype=float)
    return mass * d / dt


# -- rule builders -----------------------------------------------------------


def open_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    """``bins`` bins covering ``[lo, hi)`` with the two outer bins opened to infinity."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    edges = np.linspace(lo, hi, bins + 1)
    edges[0], edges[-1] = -INF, INF
    return edges


def bin_centers(edges: np.ndarray) -> np.ndarray:
    e = np.array(edges, dtype=float)
    finite = e[np.isfinite(e)]
    width = (finite[-1] - finite[0]) / max(len(finite) - 1, 1) if len(finite) > 1 else 1.0
    lo = np.where(np.isfinite(e[:-1]), e[:-1], e[1:] - width)
    hi = np.where(np.isfinite(e[1:]), e[1:], e[:-1] + width)
    return (lo + hi) / 2


def binned_rule(
    label: str,
    edges: Sequence[float],
    *,
    axis: str = "x",
    n_marks: int = 1,
    values: Sequence[Value] | None = None,
    labels: Sequence[str] | None = None,
    base: Box | None = None,
    extra: dict[int, Box] | None = None,
) -> CodingRule:
    """Bin mark 0 along one axis of ``base``; ``extra`` pins the boxes of the other marks."""
    edges = [float(e) for e in edges]
    centers = bin_centers(np.array(edges))
    values = list(values) if values is not None else [float(c) for c in centers]
    labels = list(labels) if labels is not None else [f"{v:.6g}" if not isinstance(v, tuple) else str(v) for v in values]
    extra = extra or {}
    spectrum, regions = [], []
    for j, (lo, hi) in enumerate(zip(edges[:-1], edges[1:]), start=1):
        spectrum.append(SpectrumValue(j, values[j - 1], labels[j - 1]))
        boxes = [(base or Box()).restrict(axis, lo, hi)] + [extra.get(k, Box()) for k in range(1, n_marks)]
        regions.append(Region(f"bin{j}", tuple(boxes), j))
    return CodingRule(label, tuple(regions), tuple(spectrum))


def sign_rule(label: str, *, axis: str = "y", n_marks: int = 1) -> CodingRule:
    """Upper/lower zone coding of each mark to ``+1``/``-1``.

    With one mark the spectrum is ``(-1, +1)``; with several it is the product
    set in lexicographic order, values being tuples.
    """
    zones = {-1.0: (-INF, 0.0), 1.0: (0.0, INF)}
    combos = list(itertools.product((-1.0, 1.0), repeat=n_marks))
    spectrum, regions = [], []
    for j, signs in enumerate(combos, start=1):
        value: Value = signs[0] if n_marks == 1 else tuple(signs)
        text = ",".join("+" if s > 0 else "-" for s in signs)
        label_j = ("+1" if signs[0] > 0 else "-1") if n_marks == 1 else f"({text})"
        spectrum.append(SpectrumValue(j, value, label_j))
        boxes = tuple(Box().restrict(axis, *zones[s]) for s in signs)
        regions.append(Region(f"zone({text})", boxes, j))
    return CodingRule(label, tuple(regions), tuple(spectrum))


# -- validation --------------------------------------------------------------


@dataclass
class ValidationReport:
    measurement_label: str
    overlaps: list[tuple[str, str]]
    fuzz_n: int
    uncodable: int
    ambiguous: int

    @property
    def disjoint(self) -> bool:
        return not self.overlaps

    @property
    def failure_rate(self) -> float:
        return (self.uncodable + self.ambiguous) / self.fuzz_n if self.fuzz_n else 0.0

    @property
    def passed(self) -> bool:
        return self.disjoint and self.uncodable == 0 and self.ambiguous == 0


def overlapping_regions(rule: CodingRule) -> list[tuple[str, str]]:
    lo, hi = rule._lo, rule._hi
    # pairwise intersection test over every mark and axis
    meet = np.all(
        np.maximum(lo[:, None], lo[None, :]) < np.minimum(hi[:, None], hi[None, :]), axis=(2, 3)
    )
    distinct = rule._index[:, None] != rule._index[None, :]
    ii, jj = np.nonzero(np.triu(meet & distinct, k=1))
    return [(rule.regions[i].region_id, rule.regions[j].region_id) for i, j in zip(ii, jj)]


def validate_rule(
    rule: CodingRule,
    world: World,
    fuzz_n: int,
    *,
    g: GenerationOp | None = None,
    mes: MeasurementSpec | None = None,
    seed: int = 0,
) -> ValidationReport:
    """Check region disjointness and fuzz totality against marks the world emits.

    Failures are reported, never raised.
    """
    overlaps = overlapping_regions(rule)
    g = g or world.default_generation()
    if mes is None:
        mes = next(m for m, _ in world.catalog() if m.label == rule.measurement_label)
    key = derive_key(seed, "validate", rule.measurement_label)
    uncodable = ambiguous = 0
    chunk = 1 << 16
    for start in range(0, fuzz_n, chunk):
        n = min(chunk, fuzz_n - start)
        u = succession_uniforms(key, start, n)
        batch = world.sample_batch(g, mes, u[:, :GEN_DRAWS], u[:, GEN_DRAWS:GEN_DRAWS + MES_DRAWS])
        pos = code_batch(rule, batch)
        uncodable += int(np.count_nonzero(pos == UNCODABLE))
        ambiguous += int(np.count_nonzero(pos == AMBIGUOUS))
    return ValidationReport(rule.measurement_label, overlaps, fuzz_n, uncodable, ambiguous)
