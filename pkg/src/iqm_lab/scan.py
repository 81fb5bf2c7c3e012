"""Locality scan over hypothesized influence speeds.

For each candidate speed ``vi`` the second measurement is delayed until an
influence of that speed leaving the first measurement event would already
have crossed the distance ``d1 + d2`` between the two apparatus.  If the
CHSH violation survives that schedule, an influence of speed ``vi`` cannot be
what carries the correlation, and ``vi`` is eliminated.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .bell import CHSH_ANGLES, CHSHResult, chsh_value, singlet_correlation_exact, world_chsh
from .errors import NonPositiveSpeed, ScheduleViolation
from .stats import Z95
from .worlds import WorldHandle, pair_spin, resolve

LHV_BOUND = 2.0


@dataclass(frozen=True)
class ScanConfig:
    d1: float = 1.0
    d2: float = 1.0
    v1: float = 1.0
    v2: float = 1.0
    vi_grid: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 100.0)
    margin: float = 1.25
    settings: tuple[float, float, float, float] = CHSH_ANGLES
    N: int = 100_000
    z: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "vi_grid", tuple(float(v) for v in self.vi_grid))
        object.__setattr__(self, "settings", tuple(float(s) for s in self.settings))
        for name in ("d1", "d2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("v1", "v2"):
            if not getattr(self, name) > 0:
                raise NonPositiveSpeed(f"{name} must be > 0")
        if any(not v > 0 for v in self.vi_grid):
            raise NonPositiveSpeed("influence speeds must be > 0")
        if any(b <= a for a, b in zip(self.vi_grid, self.vi_grid[1:])):
            raise ValueError("vi_grid must be strictly increasing")
        if not self.margin >= 1:
            raise ValueError("margin must be >= 1")
        if len(self.settings) != 4:
            raise ValueError("settings are (a, a', b, b')")
        if self.N < 1:
            raise ValueError("N must be >= 1")


@dataclass(frozen=True)
class ScheduledRun:
    vi: float
    t_mes1: float
    tau: float
    t_mes2: float

    @property
    def gap(self) -> float:
        return self.t_mes2 - self.t_mes1


def required_delay(cfg: ScanConfig, vi: float) -> float:
    """``tau = margin (d1 + d2) / vi``."""
    if not vi > 0:
        raise NonPositiveSpeed(f"influence speed must be > 0, got {vi}")
    return cfg.margin * (cfg.d1 + cfg.d2) / vi


def schedule(cfg: ScanConfig, vi: float) -> ScheduledRun:
    """Event times for one grid speed; the second event strictly follows the influence window."""
    t1 = cfg.d1 / cfg.v1
    tau = required_delay(cfg, vi)
    t2 = max(cfg.d2 / cfg.v2, t1 + tau)
    window = (cfg.d1 + cfg.d2) / vi
    # with margin 1 the window is met with equality; step past it
    while not t2 - t1 > window:
        t2 = math.nextafter(t2, math.inf)
    return ScheduledRun(vi, t1, tau, t2)


@dataclass
class ScanPoint:
    run: ScheduledRun
    chsh: CHSHResult
    status: str  # eliminated | not_eliminated | undecided

    @property
    def vi(self) -> float:
        return self.run.vi

    def to_dict(self) -> dict:
        return {
            "vi": self.vi,
            "t_mes1": self.run.t_mes1,
            "tau": self.run.tau,
            "t_mes2": self.run.t_mes2,
            "status": self.status,
            "chsh": self.chsh.to_dict(),
        }


@dataclass
class ScanReport:
    world_id: str
    cfg: ScanConfig
    points: list[ScanPoint] = field(default_factory=list)
    quantum_S: float = 2 * math.sqrt(2)

    @property
    def eliminated(self) -> list[float]:
        return [p.vi for p in self.points if p.status == "eliminated"]

    @property
    def spread(self) -> float:
        s = [p.chsh.S for p in self.points]
        return max(s) - min(s) if s else 0.0

    @property
    def spread_within_ci(self) -> bool:
        """Whether every pair of grid points agrees on ``S`` within ``z`` combined errors."""
        pts = self.points
        return all(
            abs(p.chsh.S - q.chsh.S) <= self.cfg.z * math.hypot(p.chsh.sigma, q.chsh.sigma)
            for i, p in enumerate(pts) for q in pts[i + 1:]
        )

    def to_dict(self) -> dict:
        v = scan_verdict(self)
        return {
            "world_id": self.world_id,
            "config": {
                "d1": self.cfg.d1, "d2": self.cfg.d2, "v1": self.cfg.v1, "v2": self.cfg.v2,
                "vi_grid": list(self.cfg.vi_grid), "margin": self.cfg.margin,
                "settings": list(self.cfg.settings), "N": self.cfg.N, "z": self.cfg.z,
            },
            "quantum_S": self.quantum_S,
            "points": [p.to_dict() for p in self.points],
            "eliminated": self.eliminated,
            "spread": self.spread,
            "spread_within_ci": self.spread_within_ci,
            "verdict": v.to_dict(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["vi", "a", "b", "E", "ci", "S"])
        for p in self.points:
            for e in p.chsh.estimates:
                w.writerow([repr(p.vi), repr(e.a), repr(e.b), repr(e.E), repr(Z95 * e.sigma), repr(p.chsh.S)])
        return buf.getvalue()


def _status(chsh: CHSHResult, quantum_S: float, z: float) -> str:
    if chsh.S - z * chsh.sigma > LHV_BOUND:
        return "eliminated"
    if chsh.S + z * chsh.sigma < quantum_S:
        return "not_eliminated"
    return "undecided"


def _run_point(w, cfg: ScanConfig, index: int, seed: int, quantum_S: float, threads: int | None) -> ScanPoint:
    run = schedule(cfg, cfg.vi_grid[index])
    if not run.gap > (cfg.d1 + cfg.d2) / run.vi:
        raise ScheduleViolation(f"vi={run.vi}: gap {run.gap} does not exceed the influence window")

    def mes(a, b):
        return pair_spin(a, b, x1=-cfg.d1, x2=cfg.d2, t1=run.t_mes1, t2=run.t_mes2)

    chsh = world_chsh(w, cfg.settings, cfg.N, seed, mes_factory=mes, stream=("scan", index), threads=threads)
    return ScanPoint(run, chsh, _status(chsh, quantum_S, cfg.z))


def run_scan(world: WorldHandle, cfg: ScanConfig, seed: int, *, threads: int | None = None) -> ScanReport:
    """CHSH under the blocking schedule of every grid speed; grid points run concurrently."""
    w = resolve(world)
    a, a2, b, b2 = cfg.settings
    quantum_S = float(chsh_value(*(singlet_correlation_exact(x, y) for x, y in ((a, b), (a, b2), (a2, b), (a2, b2)))))
    idx = range(len(cfg.vi_grid))
    workers = min(threads or 1, len(cfg.vi_grid)) if cfg.vi_grid else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda i: _run_point(w, cfg, i, seed, quantum_S, 1), idx))
    else:
        points = [_run_point(w, cfg, i, seed, quantum_S, threads) for i in idx]
    return ScanReport(w.world_id, cfg, points, quantum_S)


@dataclass(frozen=True)
class ScanVerdict:
    kind: str  # no_influence_up_to_kappa | influence_detected | inconclusive
    bracket: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bracket": list(self.bracket) if self.bracket else None}

    def __str__(self) -> str:
        if self.kind == "influence_detected":
            return f"influence_detected(bracket [{self.bracket[0]:g}, {self.bracket[1]:g}])"
        return self.kind


def scan_verdict(r: ScanReport) -> ScanVerdict:
    """Summarize a scan.

    Any undecided grid point makes the scan inconclusive.  Otherwise the
    scan finds no influence up to the top of the grid when every point is
    eliminated, and detects one when some point is not; the bracket is the
    pair of neighbouring grid speeds around the first failure (lower end 0
    when the very first speed fails).
    """
    if any(p.status == "undecided" for p in r.points):
        return ScanVerdict("inconclusive")
    for i, p in enumerate(r.points):
        if p.status == "not_eliminated":
            lower = r.points[i - 1].vi if i else 0.0
            return ScanVerdict("influence_detected", (lower, p.vi))
    return ScanVerdict("no_influence_up_to_kappa")


__all__ = [
    "LHV_BOUND",
    "ScanConfig",
    "ScanPoint",
    "ScanReport",
    "ScanVerdict",
    "ScheduledRun",
    "required_delay",
    "run_scan",
    "scan_verdict",
    "schedule",
]
