"""Successions ``[G.Mes(X)]``, frequency tables, convergence diagnostics and evolution."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coding import AMBIGUOUS, UNCODABLE, CodingRule, SpectrumValue, code, code_batch
from .errors import (
    AmbiguousCoding,
    EmptyTable,
    InvalidGenerationParams,
    NonScalarSpectrum,
    UncodableMarkSet,
    UnsupportedEnvironment,
)
from .ops import (
    EnvironmentSpec,
    GenerationOp,
    MeasurementSpec,
    generation_from_dict,
    generation_to_dict,
    measurement_from_dict,
    measurement_to_dict,
)
from .rng import GEN_DRAWS, MES_DRAWS, derive_key, key_hex, succession_uniforms
from .stats import wilson_interval
from .worlds import World, WorldHandle, generate_exemplar, measure_exemplar, resolve

CHUNK = 1 << 16

_thread_cap: int | None = None


def set_thread_cap(n: int | None) -> None:
    """Cap the worker count of every subsequent run (``None`` means one per core)."""
    global _thread_cap
    if n is not None and n < 1:
        raise ValueError("thread cap must be >= 1")
    _thread_cap = n


def _workers(threads: int | None) -> int:
    return threads or _thread_cap or os.cpu_count() or 1


@dataclass(frozen=True)
class Segment:
    """A contiguous range of successions drawn from one stream."""

    stream: str
    start: int
    count: int

    def overlaps(self, other: Segment) -> bool:
        return self.stream == other.stream and self.start < other.start + other.count and other.start < self.start + self.count


@dataclass
class FrequencyTable:
    """Counts per spectrum value over ``N`` successions.

    Every report built from a table carries ``N`` and binomial intervals; the
    relative frequencies are never presented as the limiting law itself.
    """

    g: GenerationOp
    mes: MeasurementSpec
    spectrum: tuple[SpectrumValue, ...]
    counts: np.ndarray
    seed: int
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.spectrum),) or np.any(self.counts < 0):
            raise ValueError("counts must be one nonnegative integer per spectrum value")

    @property
    def measurement_label(self) -> str:
        return self.mes.label

    @property
    def k(self) -> int:
        return len(self.spectrum)

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        n = self.N
        return self.counts / n if n else np.zeros(self.k)

    def intervals(self) -> list[tuple[float, float]]:
        """95 % Wilson intervals per spectrum value."""
        return [wilson_interval(int(c), self.N) for c in self.counts]

    def to_dict(self) -> dict:
        freqs = self.frequencies
        return {
            "generation": generation_to_dict(self.g),
            "measurement": measurement_to_dict(self.mes),
            "N": self.N,
            "seed": self.seed,
            "segments": [dataclasses.asdict(s) for s in self.segments],
            "rows": [
                {
                    "index": s.index,
                    "label": s.label,
                    "value": list(s.value) if isinstance(s.value, tuple) else s.value,
                    "count": int(c),
                    "freq": float(f),
                    "ci_low": lo,
                    "ci_high": hi,
                }
                for s, c, f, (lo, hi) in zip(self.spectrum, self.counts, freqs, self.intervals())
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> FrequencyTable:
        rows = d["rows"]
        spectrum = tuple(
            SpectrumValue(r["index"], tuple(r["value"]) if isinstance(r["value"], list) else r["value"], r["label"])
            for r in rows
        )
        return cls(
            generation_from_dict(d["generation"]),
            measurement_from_dict(d["measurement"]),
            spectrum,
            np.array([r["count"] for r in rows], dtype=np.int64),
            d["seed"],
            tuple(Segment(**s) for s in d.get("segments", ())),
        )

    def csv_rows(self) -> list[list]:
        rows = [["index", "label", "count", "freq", "ci_low", "ci_high"]]
        for s, c, f, (lo, hi) in zip(self.spectrum, self.counts, self.frequencies, self.intervals()):
            rows.append([s.index, s.label, int(c), repr(float(f)), repr(lo), repr(hi)])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf).writerows(self.csv_rows())
        return buf.getvalue()


def run_succession(world: WorldHandle, g: GenerationOp, mes: MeasurementSpec, rule: CodingRule, rng: np.random.Generator) -> SpectrumValue:
    """One generation, one measurement, one coding."""
    ex = generate_exemplar(world, g, rng)
    return code(rule, measure_exemplar(world, ex, mes, rng))


def _count_range(w: World, g, mes, rule, key, start: int, n: int) -> np.ndarray:
    u = succession_uniforms(key, start, n)
    batch = w.sample_batch(g, mes, u[:, :GEN_DRAWS], u[:, GEN_DRAWS:GEN_DRAWS + MES_DRAWS])
    pos = code_batch(rule, batch)
    bad = np.flatnonzero(pos < 0)
    if bad.size:
        i = int(bad[0])
        err = UncodableMarkSet if pos[i] == UNCODABLE else AmbiguousCoding
        raise err(f"succession {start + i} of {rule.measurement_label!r} could not be coded uniquely")
    return np.bincount(pos, minlength=len(rule.spectrum))


def count_successions(
    world: WorldHandle,
    g: GenerationOp,
    mes: MeasurementSpec,
    rule: CodingRule,
    key: tuple[int, int],
    start: int,
    n: int,
    threads: int | None = None,
) -> np.ndarray:
    """Spectrum counts of successions ``start .. start+n-1`` of the stream ``key``."""
    w = resolve(world)
    if mes.label != rule.measurement_label:
        raise ValueError(f"rule for {rule.measurement_label!r} cannot code {mes.label!r}")
    w.check_generation(g)
    w.compatibility_class(mes)
    chunks = [(s, min(CHUNK, start + n - s)) for s in range(start, start + n, CHUNK)]
    total = np.zeros(len(rule.spectrum), dtype=np.int64)
    workers = min(_workers(threads), len(chunks)) if chunks else 1
    if workers <= 1:
        for s, m in chunks:
            total += _count_range(w, g, mes, rule, key, s, m)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(lambda sm: _count_range(w, g, mes, rule, key, *sm), chunks):
                total += c
    return total


def accumulate_statistics(
    world: WorldHandle,
    g: GenerationOp,
    mes: MeasurementSpec,
    rule: CodingRule,
    N: int,
    seed: int,
    *,
    stream: Sequence = (),
    start: int = 0,
    threads: int | None = None,
) -> FrequencyTable:
    """``N`` independent successions; succession ``i`` uses the stream of ``(seed, *stream)`` at counter ``start + i``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    key = derive_key(seed, *stream)
    counts = count_successions(world, g, mes, rule, key, start, N, threads)
    return FrequencyTable(g, mes, rule.spectrum, counts, seed, (Segment(key_hex(key), start, N),))


def merge_tables(a: FrequencyTable, b: FrequencyTable) -> FrequencyTable:
    """Pool two tables of the same ``(g, mes, rule)`` drawn from disjoint successions."""
    if a.g != b.g or a.mes != b.mes or a.spectrum != b.spectrum:
        raise ValueError("only tables of the same generation, measurement and coding can be merged")
    for s in a.segments:
        for t in b.segments:
            if s.overlaps(t):
                raise ValueError(f"tables share successions {s} / {t}")
    segs = tuple(sorted(a.segments + b.segments, key=lambda s: (s.stream, s.start)))
    return FrequencyTable(a.g, a.mes, a.spectrum, a.counts + b.counts, a.seed, segs)


# -- convergence ---------------------------------------------------------------


@dataclass
class ConvergenceReport:
    checkpoints: list[tuple[int, np.ndarray]]
    drifts: list[float]
    max_drift: float
    exponent: float | None
    verdict: str
    intervals: list[list[tuple[float, float]]]

    def to_dict(self) -> dict:
        return {
            "checkpoints": [{"N": n, "freq": [float(x) for x in f], "ci": [list(ci) for ci in cis]} for (n, f), cis in zip(self.checkpoints, self.intervals)],
            "drifts": self.drifts,
            "max_drift": self.max_drift,
            "exponent": self.exponent,
            "verdict": self.verdict,
        }


def drift_exponent(ns: Sequence[int], drifts: Sequence[float]) -> float | None:
    """Least-squares slope of ``log drift`` against ``log N``; ``None`` when every drift vanishes.

    Vanishing drifts among nonvanishing ones are floored at half a count,
    ``0.5 / N``, the resolution of a frequency at that ``N``.
    """
    d = np.asarray(drifts, dtype=float)
    if np.all(d == 0):
        return None
    n = np.asarray(ns, dtype=float)
    d = np.maximum(d, 0.5 / n)
    slope, _ = np.polyfit(np.log(n), np.log(d), 1)
    return float(slope)


def convergence_report(
    world: WorldHandle,
    g: GenerationOp,
    mes: MeasurementSpec,
    rule: CodingRule,
    schedule: Sequence[int],
    seed: int,
    *,
    exponent_range: tuple[float, float] = (-0.8, -0.2),
    threads: int | None = None,
) -> ConvergenceReport:
    """Frequencies at nested prefixes of one run and the decay of their successive drift.

    Checkpoint ``N_i`` reuses the first ``N_{i-1}`` successions, so the drift
    between checkpoints measures how much the added successions moved the
    frequencies.  A law that settles shows drift falling like ``N^(-1/2)``.
    """
    sched = [int(n) for n in schedule]
    if len(sched) < 3 or any(b <= a for a, b in zip(sched, sched[1:])) or sched[0] < 1:
        raise ValueError("schedule must hold at least three strictly increasing positive sizes")
    key = derive_key(seed, "convergence")
    counts = np.zeros(len(rule.spectrum), dtype=np.int64)
    done = 0
    checkpoints, intervals = [], []
    for n in sched:
        counts = counts + count_successions(world, g, mes, rule, key, done, n - done, threads)
        done = n
        checkpoints.append((n, counts / n))
        intervals.append([wilson_interval(int(c), n) for c in counts])
    drifts = [float(np.max(np.abs(f1 - f0))) for (_, f0), (_, f1) in zip(checkpoints, checkpoints[1:])]
    exponent = drift_exponent(sched[1:], drifts)
    lo, hi = exponent_range
    converging = exponent is None or lo <= exponent <= hi
    return ConvergenceReport(checkpoints, drifts, max(drifts), exponent, "converging" if converging else "inconclusive", intervals)


# -- dispersion and evolution ----------------------------------------------------


def dispersion(t: FrequencyTable) -> float:
    """Empirical variance ``sum_j f_j (x_j - mean)^2`` of the coded values."""
    if any(not s.is_scalar for s in t.spectrum):
        raise NonScalarSpectrum(f"{t.measurement_label} has vector-valued spectrum")
    if t.N < 2:
        raise EmptyTable("dispersion needs at least two successions")
    x = np.array([float(s.value) for s in t.spectrum])
    f = t.frequencies
    mean = float(f @ x)
    return float(f @ (x - mean) ** 2)


def evolve_generation(g: GenerationOp, ce: EnvironmentSpec, dt: float, world: WorldHandle | None = None) -> GenerationOp:
    """The generation ``G' = f(G, CE, dt)``: ``g`` followed by ``dt`` of evolution under ``ce``.

    ``world`` defaults to the registered world named by ``g``.
    """
    w = resolve(world if world is not None else g.world_id)
    if not w.supports(ce):
        raise UnsupportedEnvironment(f"{w.kind} cannot evolve under {ce}")
    if not (math.isfinite(dt) and dt >= 0):
        raise InvalidGenerationParams("dt", f"evolution duration must be finite and >= 0, got {dt}")
    return dataclasses.replace(g, label=f"{g.label}>{ce}:{dt:g}", evolution=g.evolution + ((ce, float(dt)),))


__all__ = [
    "CHUNK",
    "ConvergenceReport",
    "EnvironmentSpec",
    "FrequencyTable",
    "Segment",
    "accumulate_statistics",
    "convergence_report",
    "count_successions",
    "dispersion",
    "drift_exponent",
    "evolve_generation",
    "merge_tables",
    "run_succession",
    "set_thread_cap",
]
