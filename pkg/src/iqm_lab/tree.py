"""Probability trees: one trunk ``G``, one branch per compatibility class.

Each branch is crowned by a finite probability space whose weights are the
relative frequencies of its table, held as exact fractions so that the
Kolmogorov axioms can be checked without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .coding import CodingRule, SpectrumValue
from .errors import EmptyTable, EmptyViewSet, NonProductUniverse, NotComposable
from .ops import GenerationOp, MeasurementSpec, generation_to_dict, measurement_to_dict
from .protocol import FrequencyTable, accumulate_statistics, dispersion
from .stats import adjusted_sigma, binomial_sigma
from .worlds import WorldHandle, resolve

Event = frozenset  # of spectrum indices j (1-based)


@dataclass(frozen=True)
class ProbabilitySpace:
    """Universe = spectrum, algebra = all subsets, measure = relative frequencies."""

    universe: tuple[SpectrumValue, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.universe) != len(self.counts):
            raise ValueError("one count per elementary event")

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def indices(self) -> frozenset[int]:
        return frozenset(s.index for s in self.universe)

    @property
    def U(self) -> Event:
        return self.indices

    def weight(self, j: int) -> Fraction:
        return Fraction(self.counts[j - 1], self.N)

    def p(self, event: Iterable[int]) -> Fraction:
        ev = frozenset(event)
        if not ev <= self.indices:
            raise ValueError(f"event {sorted(ev)} is not a subset of the universe")
        return Fraction(sum(self.counts[j - 1] for j in ev), self.N)

    def p_mask(self, mask: np.ndarray) -> Fraction:
        """Probability of the event given as a boolean mask over the universe."""
        return Fraction(int(np.asarray(self.counts, dtype=np.int64)[mask].sum()), self.N)

    def event(self, predicate: Callable[[SpectrumValue], bool]) -> Event:
        return frozenset(s.index for s in self.universe if predicate(s))

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "universe": [{"index": s.index, "label": s.label, "count": c, "p": str(self.weight(s.index))} for s, c in zip(self.universe, self.counts)],
        }


def build_space(t: FrequencyTable) -> ProbabilitySpace:
    if t.N < 1:
        raise EmptyTable("a probability space needs at least one succession")
    return ProbabilitySpace(tuple(t.spectrum), tuple(int(c) for c in t.counts))


@dataclass(frozen=True)
class Branch:
    class_id: str
    specs: tuple[MeasurementSpec, ...]
    envelope: tuple[float, float]
    table: FrequencyTable
    space: ProbabilitySpace

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "specs": [measurement_to_dict(m) for m in self.specs],
            "envelope": {"extent": self.envelope[0], "duration": self.envelope[1]},
            "table": self.table.to_dict(),
        }


@dataclass(frozen=True)
class ProbabilityTree:
    world_id: str
    trunk: GenerationOp
    branches: tuple[Branch, ...]

    def __post_init__(self):
        ids = [b.class_id for b in self.branches]
        if len(set(ids)) != len(ids):
            raise ValueError("branch classes must be pairwise distinct")
        if any(b.table.g != self.trunk for b in self.branches):
            raise ValueError("every branch must grow from the trunk generation")

    def branch(self, class_id: str) -> Branch:
        for b in self.branches:
            if b.class_id == class_id:
                return b
        raise KeyError(class_id)

    def to_dict(self) -> dict:
        return {
            "world_id": self.world_id,
            "trunk": generation_to_dict(self.trunk),
            "branches": [b.to_dict() for b in self.branches],
        }

    def render(self) -> str:
        """Plain-text drawing: the trunk at the bottom, branches above it."""
        lines = []
        for b in self.branches:
            names = ", ".join(m.display for m in b.specs)
            lines.append(f"  [{b.class_id}]  views: {names}  N={b.table.N}")
            for s, c in zip(b.space.universe, b.space.counts):
                lines.append(f"      p({s.label}) = {c / b.space.N:.4f}")
            lines.append(f"   \\  d x (t - t_G) = {b.envelope[0]:g} x {b.envelope[1]:g}")
        lines.append("    |")
        sup = self.trunk.support
        lines.append(f"  trunk {self.trunk}  world={self.world_id}  d_G x (t_G - t_0) = {sup.extent:g} x {sup.duration:g}")
        return "\n".join(lines)


def build_tree(
    world: WorldHandle,
    g: GenerationOp,
    views: Sequence[MeasurementSpec],
    rules: Mapping[str, CodingRule] | Sequence[CodingRule] | None,
    N_per_branch: int,
    seed: int,
    *,
    threads: int | None = None,
) -> ProbabilityTree:
    """One table of ``N_per_branch`` fresh successions per compatibility class of ``views``.

    ``rules`` maps measurement labels to coding rules, or parallels ``views``;
    missing rules fall back to the world's default coding.  Each branch draws
    from its own stream, so no exemplar feeds two branches.
    """
    w = resolve(world)
    if not views:
        raise EmptyViewSet("a tree needs at least one view")
    by_view: list[CodingRule | None]
    if rules is None:
        by_view = [None] * len(views)
    elif isinstance(rules, Mapping):
        by_view = [rules.get(m.label) for m in views]
    else:
        by_view = list(rules)
    groups: dict[str, list[tuple[MeasurementSpec, CodingRule | None]]] = {}
    for m, r in zip(views, by_view):
        groups.setdefault(w.compatibility_class(m), []).append((m, r))
    branches = []
    for class_id, members in groups.items():
        mes, rule = members[0]
        rule = rule or w.default_rule(mes, g)
        table = accumulate_statistics(w, g, mes, rule, N_per_branch, seed, stream=("branch", class_id), threads=threads)
        branches.append(Branch(class_id, tuple(m for m, _ in members), w.envelope(g, mes), table, build_space(table)))
    return ProbabilityTree(w.world_id, g, tuple(branches))


# -- independence and the Kolmogorov axioms -------------------------------------------


@dataclass(frozen=True)
class IndependenceResult:
    verdict: str
    p_a: Fraction
    p_b: Fraction
    p_ab: Fraction
    deviation: float
    sigma: float

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "p_a": float(self.p_a), "p_b": float(self.p_b), "p_ab": float(self.p_ab), "deviation": self.deviation, "sigma": self.sigma}


def _deviation_sigma(cells: Sequence[float], grad: Sequence[float], n: int) -> float:
    """Delta-method standard error of a smooth function of multinomial cell frequencies."""
    c = np.asarray(cells, dtype=float)
    gr = np.asarray(grad, dtype=float)
    var = (gr * gr) @ c - (gr @ c) ** 2
    return math.sqrt(max(var, 0.0) / n)


def independence_verdict(s: ProbabilitySpace, A: Iterable[int], B: Iterable[int], z: float = 4.0) -> IndependenceResult:
    """Compare ``p(A & B)`` with ``p(A) p(B)``.

    The margin ``sigma`` is the larger of the delta-method error of the
    observed deviation and its error under the independence hypothesis.
    ``independent`` within ``(z - 1) sigma``, ``dependent`` beyond
    ``(z + 1) sigma``, ``inconclusive`` in between.
    """
    A, B = frozenset(A), frozenset(B)
    pa, pb, pab = s.p(A), s.p(B), s.p(A & B)
    d = pab - pa * pb
    n = s.N
    fa, fb, fab = float(pa), float(pb), float(pab)
    cells = [fab, fa - fab, fb - fab, 1 - fa - fb + fab]
    grad = [1 - fa - fb, -fb, -fa, 0.0]
    sigma = max(_deviation_sigma(cells, grad, n), math.sqrt(fa * (1 - fa) * fb * (1 - fb) / n))
    if d == 0:
        verdict = "independent"
    elif sigma == 0:
        verdict = "dependent"
    elif abs(d) <= (z - 1) * sigma:
        verdict = "independent"
    elif abs(d) >= (z + 1) * sigma:
        verdict = "dependent"
    else:
        verdict = "inconclusive"
    return IndependenceResult(verdict, pa, pb, pab, float(d), sigma)


@dataclass
class KolmogorovCheck:
    pairs: int
    violations: list[tuple[str, tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def kolmogorov_violations(space: ProbabilitySpace, n_pairs: int, rng: np.random.Generator) -> KolmogorovCheck:
    """Check the finite Kolmogorov axioms on ``n_pairs`` random event pairs, in exact arithmetic."""
    k = len(space.universe)
    counts = np.asarray(space.counts, dtype=np.int64)
    n = space.N
    out = KolmogorovCheck(n_pairs)

    def p(mask):
        return Fraction(int(counts[mask].sum()), n)

    full, empty = np.ones(k, bool), np.zeros(k, bool)
    if p(full) != 1:
        out.violations.append(("p(U) = 1", (), ()))
    if p(empty) != 0:
        out.violations.append(("p(empty) = 0", (), ()))
    for _ in range(n_pairs):
        a = rng.random(k) < rng.random()
        b = rng.random(k) < rng.random()
        pa, pb, pu = p(a), p(b), p(a | b)

        def fail(name):
            out.violations.append((name, tuple(np.flatnonzero(a) + 1), tuple(np.flatnonzero(b) + 1)))

        if not (0 <= pa <= 1 and 0 <= pb <= 1):
            fail("0 <= p <= 1")
        if not (a & b).any() and pu != pa + pb:
            fail("additivity")
        b_minus_a = b & ~a
        if p(a | b_minus_a) != pa + p(b_minus_a):
            fail("additivity on A, B - A")
        if not (pa <= pu and pb <= pu):
            fail("monotonicity")
        if pu > pa + pb:
            fail("subadditivity")
    return out


# -- cross-branch reports ---------------------------------------------------------------


@dataclass
class MetaDependenceReport:
    pairs: list[tuple[str, str, float, float]]
    pauli_variance_sum: float | None

    def to_dict(self) -> dict:
        return {
            "pairs": [{"x": x, "y": y, "dispersion_x": dx, "dispersion_y": dy} for x, y, dx, dy in self.pairs],
            "pauli_variance_sum": self.pauli_variance_sum,
        }


def meta_dependence_report(tree: ProbabilityTree) -> MetaDependenceReport:
    """Empirical dispersions of every pair of mutually incompatible scalar branches."""
    scalar = [b for b in tree.branches if all(s.is_scalar for s in b.table.spectrum) and b.table.N >= 2]
    disp = {b.class_id: dispersion(b.table) for b in scalar}
    pairs = [(x.class_id, y.class_id, disp[x.class_id], disp[y.class_id]) for i, x in enumerate(scalar) for y in scalar[i + 1:]]
    paulis = ("sigma_x", "sigma_y", "sigma_z")
    total = sum(disp[c] for c in paulis) if all(c in disp for c in paulis) else None
    return MetaDependenceReport(pairs, total)


@dataclass
class FactorizationReport:
    xs: list[float]
    ys: list[float]
    joint: np.ndarray
    marginal_x: np.ndarray
    marginal_y: np.ndarray
    deviation: np.ndarray
    sigma: np.ndarray
    z: float
    N: int

    @property
    def within_ci(self) -> np.ndarray:
        return np.abs(self.deviation) <= self.z * self.sigma

    @property
    def max_deviation(self) -> tuple[float, tuple[float, float]]:
        i, j = np.unravel_index(np.argmax(np.abs(self.deviation)), self.deviation.shape)
        return float(self.deviation[i, j]), (self.xs[i], self.ys[j])

    def cell(self, x: float, y: float) -> tuple[float, float]:
        """Deviation and its standard error at outcome pair ``(x, y)``."""
        i, j = self.xs.index(x), self.ys.index(y)
        return float(self.deviation[i, j]), float(self.sigma[i, j])

    def to_dict(self) -> dict:
        dev, at = self.max_deviation
        return {
            "N": self.N,
            "xs": self.xs,
            "ys": self.ys,
            "joint": self.joint.tolist(),
            "marginal_x": self.marginal_x.tolist(),
            "marginal_y": self.marginal_y.tolist(),
            "deviation": self.deviation.tolist(),
            "sigma": self.sigma.tolist(),
            "z": self.z,
            "max_deviation": {"value": dev, "at": list(at)},
        }


def joint_marginal_report(source: Branch | FrequencyTable, z: float = 4.0) -> FactorizationReport:
    """Joint law of paired outcomes, both marginals and ``p(x, y) - p(x) p(y)`` per cell."""
    table = source.table if isinstance(source, Branch) else source
    values = [s.value for s in table.spectrum]
    if not all(isinstance(v, tuple) and len(v) == 2 for v in values):
        raise NonProductUniverse(f"{table.measurement_label}: elementary events are not outcome pairs")
    xs = sorted({v[0] for v in values})
    ys = sorted({v[1] for v in values})
    if len(values) != len(xs) * len(ys) or len(set(values)) != len(values):
        raise NonProductUniverse(f"{table.measurement_label}: universe is not the product of its marginals")
    n = table.N
    if n < 1:
        raise EmptyTable("no successions")
    joint = np.zeros((len(xs), len(ys)))
    for v, c in zip(values, table.counts):
        joint[xs.index(v[0]), ys.index(v[1])] = c / n
    mx, my = joint.sum(axis=1), joint.sum(axis=0)
    dev = joint - np.outer(mx, my)
    sigma = np.zeros_like(dev)
    for i in range(len(xs)):
        for j in range(len(ys)):
            ii = np.arange(len(xs))[:, None] == i
            jj = np.arange(len(ys))[None, :] == j
            grad = (ii & jj).astype(float) - ii * my[j] - jj * mx[i]
            sigma[i, j] = max(
                _deviation_sigma(joint.ravel(), grad.ravel(), n),
                math.sqrt(mx[i] * (1 - mx[i]) * my[j] * (1 - my[j]) / n),
            )
    return FactorizationReport(xs, ys, joint, mx, my, dev, sigma, z, n)


# -- composed generations -------------------------------------------------------------------


@dataclass
class InterferenceReport:
    values: list[float]
    p1: np.ndarray
    p2: np.ndarray
    p12: np.ndarray
    mixture: np.ndarray
    deviation_mixture: np.ndarray
    deviation_sum: np.ndarray
    sigma_mixture: np.ndarray
    reference: str
    deviation_reference: np.ndarray
    sigma_reference: np.ndarray
    window: tuple[int, int]
    visibility: float
    dark_index: int
    central_index: int
    N: int
    z: float

    @property
    def reference_within_ci(self) -> bool:
        return bool(np.all(np.abs(self.deviation_reference) <= self.z * self.sigma_reference))

    @property
    def dark_ratio(self) -> float:
        """``p12 / mixture`` at the darkest bin of the central window."""
        m = self.mixture[self.dark_index]
        return float(self.p12[self.dark_index] / m) if m > 0 else math.inf

    @property
    def central_ratio(self) -> float:
        m = self.mixture[self.central_index]
        return float(self.p12[self.central_index] / m) if m > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "values": self.values,
            "p1": self.p1.tolist(),
            "p2": self.p2.tolist(),
            "p12": self.p12.tolist(),
            "mixture": self.mixture.tolist(),
            "deviation_mixture": self.deviation_mixture.tolist(),
            "deviation_sum": self.deviation_sum.tolist(),
            "reference": self.reference,
            "deviation_reference": self.deviation_reference.tolist(),
            "window": list(self.window),
            "visibility": self.visibility,
            "dark_index": self.dark_index,
            "dark_ratio": self.dark_ratio,
            "central_ratio": self.central_ratio,
            "reference_within_ci": self.reference_within_ci,
        }


def _reference(g1: GenerationOp, g2: GenerationOp, g12: GenerationOp) -> str:
    if g12.components:
        if set(g12.components) != {g1, g2} or len(g12.components) != 2:
            raise NotComposable(f"{g12} is not composed of {g1} and {g2}")
        return "mixture"
    if g12 == g1:
        return "g1"
    if g12 == g2:
        return "g2"
    raise NotComposable(f"{g12} is neither a composition of {g1}, {g2} nor one of them")


def composed_interference_report(
    world: WorldHandle,
    g1: GenerationOp,
    g2: GenerationOp,
    g12: GenerationOp,
    view: MeasurementSpec,
    rule: CodingRule,
    N: int,
    seed: int,
    *,
    z: float = 4.0,
    threads: int | None = None,
) -> InterferenceReport:
    """Tables of ``g1``, ``g2`` and ``g12`` on one view, and how ``p12`` departs from the route laws.

    The baseline is the equal mixture ``(p1 + p2) / 2``; the raw sum
    ``p1 + p2`` is reported alongside.  When ``g12`` is just one of the routes
    the deviation is taken against that route's own law.  Visibility is
    measured over the central window where the mixture is at least half its
    maximum.
    """
    w = resolve(world)
    w.compose(g1, g2)  # raises NotComposable for worlds without composition
    reference = _reference(g1, g2, g12)
    tables = [
        accumulate_statistics(w, g, view, rule, N, seed, stream=("interference", name), threads=threads)
        for name, g in (("g1", g1), ("g2", g2), ("g12", g12))
    ]
    p1, p2, p12 = (t.frequencies for t in tables)
    c1, c2, c12 = (t.counts for t in tables)
    mixture = (p1 + p2) / 2
    s1 = np.array([adjusted_sigma(int(c), N) for c in c1])
    s2 = np.array([adjusted_sigma(int(c), N) for c in c2])
    s12 = np.array([adjusted_sigma(int(c), N) for c in c12])
    sigma_mix = np.sqrt(s12**2 + (s1**2 + s2**2) / 4)
    ref = {"mixture": (mixture, sigma_mix), "g1": (p1, np.hypot(s12, s1)), "g2": (p2, np.hypot(s12, s2))}[reference]
    inside = np.flatnonzero(mixture >= mixture.max() / 2)
    lo, hi = int(inside[0]), int(inside[-1])
    win = p12[lo:hi + 1]
    top, bottom = float(win.max()), float(win.min())
    visibility = (top - bottom) / (top + bottom) if top + bottom > 0 else 0.0
    values = [float(s.value) for s in rule.spectrum]
    central = int(np.argmin(np.abs(values)))
    return InterferenceReport(
        values, p1, p2, p12, mixture, p12 - mixture, p12 - (p1 + p2), sigma_mix,
        reference, p12 - ref[0], ref[1], (lo, hi), visibility, lo + int(np.argmin(win)), central, N, z,
    )


__all__ = [
    "Branch",
    "FactorizationReport",
    "IndependenceResult",
    "InterferenceReport",
    "KolmogorovCheck",
    "MetaDependenceReport",
    "ProbabilitySpace",
    "ProbabilityTree",
    "build_space",
    "build_tree",
    "composed_interference_report",
    "independence_verdict",
    "joint_marginal_report",
    "kolmogorov_violations",
    "meta_dependence_report",
]
