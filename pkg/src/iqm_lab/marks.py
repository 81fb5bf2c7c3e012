"""Observable output of measurement interactions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Coord = tuple[float, float, float, float]


@dataclass(frozen=True)
class Mark:
    """A mark left on an apparatus register at space-time point ``(x, y, z, t)``."""

    register_id: str
    coord: Coord
    payload: float | None = None

    def __post_init__(self):
        if len(self.coord) != 4 or not all(math.isfinite(c) for c in self.coord):
            raise ValueError(f"mark coordinate must be 4 finite numbers, got {self.coord}")


@dataclass(frozen=True)
class MarkSet:
    marks: tuple[Mark, ...]
    measurement_label: str

    def __post_init__(self):
        if not self.marks:
            raise ValueError("a mark set holds at least one mark")

    def __len__(self) -> int:
        return len(self.marks)


@dataclass
class MarkBatch:
    """Mark sets of ``n`` successions stored column-wise.

    ``coords`` has shape ``(n, m, 4)`` and ``payload`` shape ``(n, m)`` with
    NaN standing for "no payload".  Every succession of a batch emits the same
    register layout.
    """

    registers: tuple[str, ...]
    coords: np.ndarray
    payload: np.ndarray
    measurement_label: str

    def __len__(self) -> int:
        return self.coords.shape[0]

    def markset(self, i: int) -> MarkSet:
        marks = []
        for k, reg in enumerate(self.registers):
            pl = self.payload[i, k]
            marks.append(Mark(reg, tuple(float(c) for c in self.coords[i, k]), None if np.isnan(pl) else float(pl)))
        return MarkSet(tuple(marks), self.measurement_label)

    @classmethod
    def from_marksets(cls, sets: list[MarkSet]) -> MarkBatch:
        first = sets[0]
        regs = tuple(m.register_id for m in first.marks)
        coords = np.array([[m.coord for m in s.marks] for s in sets], dtype=float)
        payload = np.array(
            [[np.nan if m.payload is None else m.payload for m in s.marks] for s in sets], dtype=float
        )
        return cls(regs, coords, payload, first.measurement_label)
