"""Local hidden-variable models, correlation functions and Bell-type bounds."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from . import quantum
from .errors import MalformedModel
from .protocol import accumulate_statistics
from .stats import Z95, correlation_from_counts
from .worlds import WorldHandle, pair_spin, resolve

Setting = float | tuple[float, float, float]
Response = Callable[[Setting, Hashable], int]

# a = 0, a' = 90 deg, b = 45 deg, b' = 135 deg
CHSH_ANGLES = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)


def setting_vector(s: Setting) -> np.ndarray:
    """Unit vector of a setting: an angle from z in the x-z plane, or an explicit 3-vector."""
    if isinstance(s, Real):
        return np.array([math.sin(s), 0.0, math.cos(s)])
    v = np.asarray(s, dtype=float)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class LHVModel:
    """Finite hidden-parameter space with local deterministic responses.

    ``response_a`` sees only ``(a, lam)`` and ``response_b`` only
    ``(b, lam)``; locality holds by construction.
    """

    lambdas: tuple[Hashable, ...]
    rho: tuple[Fraction | float, ...]
    response_a: Response
    response_b: Response

    def __post_init__(self):
        if not self.lambdas or len(self.lambdas) != len(self.rho):
            raise MalformedModel("one weight per hidden value is required")
        if any(r < 0 for r in self.rho):
            raise MalformedModel("weights must be >= 0")
        total = sum(self.rho)
        exact = all(isinstance(r, (int, Fraction)) for r in self.rho)
        if (exact and total != 1) or (not exact and abs(total - 1) > 1e-9):
            raise MalformedModel(f"weights sum to {total}, not 1")

    @classmethod
    def from_tables(
        cls,
        lambdas: Sequence[Hashable],
        rho: Sequence[Fraction | float],
        table_a: Mapping[tuple[Setting, Hashable], int],
        table_b: Mapping[tuple[Setting, Hashable], int],
    ) -> LHVModel:
        def lookup(table, side):
            def response(s, lam):
                try:
                    return table[(s, lam)]
                except KeyError:
                    raise MalformedModel(f"no response {side}({s}, {lam})") from None

            return response

        return cls(tuple(lambdas), tuple(rho), lookup(dict(table_a), "A"), lookup(dict(table_b), "B"))


def _pm1(v, side, s, lam) -> int:
    if v not in (1, -1):
        raise MalformedModel(f"{side}({s}, {lam}) = {v} is not +-1")
    return int(v)


def lhv_correlation_exact(m: LHVModel, a: Setting, b: Setting) -> Fraction | float:
    """``sum_lam rho(lam) A(a, lam) B(b, lam)``; exact when the weights are fractions."""
    total: Fraction | float = 0
    for lam, r in zip(m.lambdas, m.rho):
        total += r * _pm1(m.response_a(a, lam), "A", a, lam) * _pm1(m.response_b(b, lam), "B", b, lam)
    return total


def _sign(x: float) -> int:
    return 1 if x >= 0 else -1


def anti_copy_model(n: int, geometry: str = "sphere") -> LHVModel:
    """``A = sign(a . lam)``, ``B = -sign(b . lam)`` with ``lam`` on an even grid.

    ``sphere`` spreads ``n`` points over the unit sphere (Fibonacci lattice);
    ``circle`` puts them on the x-z great circle, offset half a step so no
    point sits on a setting boundary.  For coplanar settings at angle
    ``theta`` both approach ``E = -1 + 2 theta / pi``.
    """
    if n < 1:
        raise MalformedModel("the grid needs at least one point")
    if geometry == "sphere":
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = math.pi * (3 - math.sqrt(5)) * k
        r = np.sqrt(1 - z * z)
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    elif geometry == "circle":
        ang = 2 * math.pi * (np.arange(n) + 0.5) / n
        pts = np.stack([np.sin(ang), np.zeros(n), np.cos(ang)], axis=1)
    else:
        raise MalformedModel(f"unknown geometry {geometry!r}")
    lambdas = tuple(tuple(float(c) for c in p) for p in pts)
    return LHVModel(
        lambdas,
        tuple(Fraction(1, n) for _ in range(n)),
        lambda a, lam: _sign(float(setting_vector(a) @ np.asarray(lam))),
        lambda b, lam: -_sign(float(setting_vector(b) @ np.asarray(lam))),
    )


def random_lhv_model(rng: np.random.Generator, settings: Sequence[Setting], n_lambda: int = 8, *, anticorrelated: bool = False) -> LHVModel:
    """A model with random exact weights and random response tables over ``settings``.

    With ``anticorrelated`` the second response is the negative of the first
    at equal settings, ``B(x, lam) = -A(x, lam)``.
    """
    lambdas = tuple(range(n_lambda))
    raw = [int(w) for w in rng.integers(0, 100, n_lambda)]
    if sum(raw) == 0:
        raw[0] = 1
    rho = tuple(Fraction(w, sum(raw)) for w in raw)
    ta = {(s, lam): int(rng.choice((-1, 1))) for s in settings for lam in lambdas}
    if anticorrelated:
        tb = {key: -v for key, v in ta.items()}
    else:
        tb = {(s, lam): int(rng.choice((-1, 1))) for s in settings for lam in lambdas}
    return LHVModel.from_tables(lambdas, rho, ta, tb)


def singlet_correlation_exact(a: Setting, b: Setting) -> float:
    """``<psi| (sigma.a) x (sigma.b) |psi>`` on the singlet state vector."""
    psi = quantum.singlet()
    op = np.kron(quantum.spin_operator(setting_vector(a)), quantum.spin_operator(setting_vector(b)))
    return float(np.real(psi.conj() @ op @ psi))


# -- sampled correlations -------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationEstimate:
    a: float
    b: float
    E: float
    sigma: float
    N: int
    source: str

    @property
    def ci(self) -> tuple[float, float]:
        """Normal-approximation 95 % interval, clipped to ``[-1, 1]``."""
        return max(-1.0, self.E - Z95 * self.sigma), min(1.0, self.E + Z95 * self.sigma)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "E": self.E, "sigma": self.sigma, "ci": list(self.ci), "N": self.N, "source": self.source}


@dataclass
class CorrelationTable:
    estimates: list[CorrelationEstimate]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["a", "b", "E", "ci", "N"])
        for e in self.estimates:
            w.writerow([repr(e.a), repr(e.b), repr(e.E), repr(Z95 * e.sigma), e.N])
        return buf.getvalue()


def paired_correlation(counts: Sequence[int]) -> tuple[float, float]:
    """``E`` and its error from counts over the ordered pairs ``(-,-), (-,+), (+,-), (+,+)``."""
    same = int(counts[0]) + int(counts[3])
    return correlation_from_counts(same, int(sum(counts)))


def world_correlation(
    world: WorldHandle,
    a: float,
    b: float,
    N: int,
    seed: int,
    *,
    mes=None,
    stream: Sequence = (),
    threads: int | None = None,
) -> CorrelationEstimate:
    """Mean product of the two coded outcomes over ``N`` fresh exemplars."""
    w = resolve(world)
    mes = mes or pair_spin(a, b)
    rule = w.default_rule(mes)
    table = accumulate_statistics(
        w, w.default_generation(), mes, rule, N, seed,
        stream=("correlation", repr(float(a)), repr(float(b)), *stream), threads=threads,
    )
    E, sigma = paired_correlation(table.counts)
    return CorrelationEstimate(float(a), float(b), E, sigma, N, "world_sampled")


# -- inequalities -------------------------------------------------------------------------


def chsh_value(e_ab, e_ab2, e_a2b, e_a2b2):
    """``S = |E(a,b) - E(a,b')| + |E(a',b) + E(a',b')|``."""
    return abs(e_ab - e_ab2) + abs(e_a2b + e_a2b2)


def lhv_max_bruteforce(settings: Sequence[Setting] = CHSH_ANGLES) -> tuple[int, tuple[int, int, int, int]]:
    """Largest ``S`` over the 16 deterministic assignments ``(A(a), A(a'), B(b), B(b'))``.

    Any local model is a convex mixture of these assignments, so the value
    bounds every one of them.  The first maximizing assignment in
    enumeration order is returned as witness.
    """
    if len(settings) != 4:
        raise ValueError("settings are (a, a', b, b')")
    best, witness = None, None
    for aa, aa2, bb, bb2 in itertools.product((1, -1), repeat=4):
        s = chsh_value(aa * bb, aa * bb2, aa2 * bb, aa2 * bb2)
        if best is None or s > best:
            best, witness = s, (aa, aa2, bb, bb2)
    return best, witness


@dataclass(frozen=True)
class Bell1964Result:
    margin: Fraction | float
    threshold: float

    @property
    def violated(self) -> bool:
        return self.margin > self.threshold

    @property
    def satisfied(self) -> bool:
        return not self.violated


def bell1964_check(e_ab, e_ac, e_bc, threshold: float = 0.0) -> Bell1964Result:
    """``margin = |E(a,b) - E(a,c)| - (1 + E(b,c))``; violated when above ``threshold``.

    The bound holds for local models with perfectly anticorrelated responses
    at equal settings.
    """
    for e in (e_ab, e_ac, e_bc):
        if not -1 <= e <= 1:
            raise ValueError(f"correlation {e} outside [-1, 1]")
    return Bell1964Result(abs(e_ab - e_ac) - (1 + e_bc), threshold)


def chsh_from_model(m: LHVModel, settings: Sequence[Setting] = CHSH_ANGLES):
    a, a2, b, b2 = settings
    return chsh_value(*(lhv_correlation_exact(m, x, y) for x, y in ((a, b), (a, b2), (a2, b), (a2, b2))))


def bell1964_from_model(m: LHVModel, a: Setting, b: Setting, c: Setting) -> Bell1964Result:
    return bell1964_check(lhv_correlation_exact(m, a, b), lhv_correlation_exact(m, a, c), lhv_correlation_exact(m, b, c))


@dataclass
class CHSHResult:
    settings: tuple[float, float, float, float]
    estimates: list[CorrelationEstimate]
    S: float
    sigma: float
    bound: int = 2

    @property
    def violated(self) -> bool:
        return self.S > self.bound

    def summary(self) -> str:
        """One line with ``S``, its 95 % half-width and the local bound."""
        state = "VIOLATED" if self.violated else "satisfied"
        return f"CHSH S={self.S:.2f} ± {Z95 * self.sigma:.2g}, LHV bound {self.bound:.2f}: {state}"

    def to_dict(self) -> dict:
        return {
            "settings": list(self.settings),
            "S": self.S,
            "sigma": self.sigma,
            "bound": self.bound,
            "violated": self.violated,
            "correlations": [e.to_dict() for e in self.estimates],
        }


def world_chsh(world: WorldHandle, settings: Sequence[float] = CHSH_ANGLES, N: int = 100_000, seed: int = 0, *, mes_factory=None, stream: Sequence = (), threads: int | None = None) -> CHSHResult:
    """CHSH value of a paired-outcome world from four sampled correlations.

    ``mes_factory(a, b)`` may supply schedule-specific measurement specs.
    """
    a, a2, b, b2 = (float(s) for s in settings)
    pairs = ((a, b), (a, b2), (a2, b), (a2, b2))
    ests = [
        world_correlation(world, x, y, N, seed, mes=mes_factory(x, y) if mes_factory else None, stream=stream, threads=threads)
        for x, y in pairs
    ]
    S = chsh_value(*(e.E for e in ests))
    sigma = math.sqrt(sum(e.sigma**2 for e in ests))
    bound, _ = lhv_max_bruteforce(settings)
    return CHSHResult((a, a2, b, b2), ests, float(S), sigma, bound)


__all__ = [
    "CHSH_ANGLES",
    "Bell1964Result",
    "CHSHResult",
    "CorrelationEstimate",
    "CorrelationTable",
    "LHVModel",
    "anti_copy_model",
    "bell1964_check",
    "bell1964_from_model",
    "chsh_from_model",
    "chsh_value",
    "lhv_correlation_exact",
    "lhv_max_bruteforce",
    "paired_correlation",
    "random_lhv_model",
    "setting_vector",
    "singlet_correlation_exact",
    "world_chsh",
    "world_correlation",
]
