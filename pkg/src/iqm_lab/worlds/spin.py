"""Spin worlds: a single qubit, the two-system singlet, and the influence-contrast imitation."""

from __future__ import annotations

import math

import numpy as np

from .. import quantum
from ..coding import CodingRule, sign_rule
from ..errors import IncompatibleMeasurementSpec, InvalidWorldSpec
from ..marks import MarkBatch
from ..ops import MeasurementSpec
from .base import World, jitter

_NAMED_AXES = {
    "sigma_x": (math.pi / 2, 0.0),
    "sigma_y": (math.pi / 2, math.pi / 2),
    "sigma_z": (0.0, 0.0),
}


def pauli(name: str, t: float = 1.0) -> MeasurementSpec:
    """Stern-Gerlach measurement along one of the named Pauli axes."""
    theta, phi = _NAMED_AXES[name]
    return MeasurementSpec.make("stern_gerlach", name=name, theta=theta, phi=phi, t=t)


def _axis_key(n: np.ndarray) -> str:
    n = np.where(np.abs(n) < 1e-12, 0.0, n)
    lead = n[np.flatnonzero(n)[0]]
    if lead < 0:
        n = -n
    for name, (theta, phi) in _NAMED_AXES.items():
        if np.allclose(n, quantum.bloch_axis(theta, phi), atol=1e-9):
            return name
    return "axis({:.9f},{:.9f},{:.9f})".format(*(n + 0.0))


def _sample_index(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = np.inf
    return np.argmax(u[:, None] < cum, axis=1)


class Qubit(World):
    """A spin-1/2 prepared along a Bloch direction ``(theta, phi)``.

    Stern-Gerlach readout along ``(theta, phi)`` of the measurement puts the
    impact in the upper screen zone for ``+1`` and in the lower zone for
    ``-1``.  ``larmor`` environments precess the spin about the angular
    velocity ``(wx, wy, wz)``.
    """

    kind = "qubit"
    is_quantum = True
    gen_defaults = {"theta": 0.0, "phi": 0.0}
    mes_defaults = {"stern_gerlach": {"theta": 0.0, "phi": 0.0, "t": 1.0}}
    environments = frozenset({"free_flight", "larmor"})

    def default_generation(self):
        return self.generation("prep")

    def catalog(self):
        return [(pauli(name), name) for name in ("sigma_x", "sigma_y", "sigma_z")]

    def _classify(self, label, p):
        return _axis_key(quantum.bloch_axis(p["theta"], p["phi"]))

    def _state(self, g) -> np.ndarray:
        p = self.gen_params(g)
        psi = quantum.bloch_state(p["theta"], p["phi"])
        for env, dt in g.evolution:
            if env.name == "larmor":
                e = env.p
                psi = quantum.precession([e.get("wx", 0.0), e.get("wy", 0.0), e.get("wz", 0.0)], dt) @ psi
        return psi

    def _prepare(self, g, u):
        return np.broadcast_to(self._state(g), (len(u), 2))

    def _emit(self, g, hidden, mes, u):
        p = self.measurement_params(mes)
        if p["t"] <= 0:
            raise IncompatibleMeasurementSpec("stern_gerlach: readout time t must be > 0")
        plus = quantum.eigenbasis(quantum.bloch_axis(p["theta"], p["phi"]))[1]
        p_plus = np.abs(hidden @ plus.conj()) ** 2
        sign = np.where(u[:, 0] < p_plus, 1.0, -1.0)
        n = len(hidden)
        coords = np.zeros((n, 1, 4))
        coords[:, 0, 1] = sign * jitter(u[:, 1])
        coords[:, 0, 3] = g.ready_time + p["t"]
        return MarkBatch(("sg_screen",), coords, np.full((n, 1), np.nan), mes.label)

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        self.measurement_params(mes)
        return sign_rule("stern_gerlach")

    def envelope(self, g, mes):
        return 1.0, self.measurement_params(mes)["t"]


def pair_spin(a: float, b: float, *, x1: float = -1.0, x2: float = 1.0, t1: float = 1.0, t2: float = 1.0) -> MeasurementSpec:
    """Joint spin measurement: ``sigma . a`` on S1 at ``(x1, t1)``, ``sigma . b`` on S2 at ``(x2, t2)``.

    Angles are in radians, measured in the x-z plane from the z axis.
    """
    name = f"pair(a={math.degrees(a):g}deg,b={math.degrees(b):g}deg)"
    return MeasurementSpec.make("pair_spin", name=name, a=a, b=b, x1=x1, x2=x2, t1=t1, t2=t2)


def _plane_axis(angle: float) -> np.ndarray:
    return np.array([math.sin(angle), 0.0, math.cos(angle)])


class _PairWorld(World):
    mes_defaults = {"pair_spin": {"a": 0.0, "b": 0.0, "x1": -1.0, "x2": 1.0, "t1": 1.0, "t2": 1.0}}
    environments = frozenset({"free_flight"})

    def default_generation(self):
        return self.generation("decay")

    def catalog(self):
        q = math.pi / 4
        specs = [pair_spin(0.0, q), pair_spin(0.0, 3 * q), pair_spin(2 * q, q), pair_spin(2 * q, 3 * q)]
        return [(m, self.compatibility_class(m)) for m in specs]

    def _classify(self, label, p):
        # both partial measurements of one setting pair act on one exemplar
        a = math.remainder(p["a"], 2 * math.pi)
        b = math.remainder(p["b"], 2 * math.pi)
        return f"pair(a={a:.9f},b={b:.9f})"

    def _pair_marks(self, g, p, s1, s2, u1, u2, label):
        n = len(s1)
        coords = np.zeros((n, 2, 4))
        coords[:, 0, 0], coords[:, 1, 0] = p["x1"], p["x2"]
        coords[:, 0, 1] = s1 * jitter(u1)
        coords[:, 1, 1] = s2 * jitter(u2)
        coords[:, 0, 3] = g.ready_time + p["t1"]
        coords[:, 1, 3] = g.ready_time + p["t2"]
        return MarkBatch(("A1", "A2"), coords, np.full((n, 2), np.nan), label)

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        self.measurement_params(mes)
        return sign_rule("pair_spin", n_marks=2)

    def envelope(self, g, mes):
        p = self.measurement_params(mes)
        return max(abs(p["x1"]), abs(p["x2"])), max(p["t1"], p["t2"])


class SingletPair(_PairWorld):
    """Two spin-1/2 systems produced together in the singlet state."""

    kind = "singlet_pair"
    is_quantum = True

    def _prepare(self, g, u):
        return np.broadcast_to(quantum.singlet(), (len(u), 4))

    def _emit(self, g, hidden, mes, u):
        p = self.measurement_params(mes)
        ea = quantum.eigenbasis(_plane_axis(p["a"]))
        eb = quantum.eigenbasis(_plane_axis(p["b"]))
        # rows ordered (-,-), (-,+), (+,-), (+,+)
        product = np.array([np.kron(ea[i], eb[j]) for i in (0, 1) for j in (0, 1)])
        probs = np.abs(hidden @ product.conj().T) ** 2
        idx = _sample_index(probs, u[:, 0])
        s1 = np.where(idx >= 2, 1.0, -1.0)
        s2 = np.where(idx % 2 == 1, 1.0, -1.0)
        return self._pair_marks(g, p, s1, s2, u[:, 1], u[:, 2], mes.label)


class InfluenceContrast(_PairWorld):
    """A local hidden-variable imitation of the singlet plus a finite-speed influence.

    Each exemplar carries a hidden unit vector ``lam``; the responses are
    ``sign(a . lam)`` and ``-sign(b . lam)``, whose correlation is
    ``-1 + 2 theta / pi``.  The first measurement event emits an influence
    travelling at ``influence_speed``.  If it reaches the other apparatus no
    later than the second event, that second outcome is redrawn from the
    quantum conditional law (with probability ``coupling``), restoring the
    singlet correlation ``-cos theta``.
    """

    kind = "influence_contrast"
    spec_defaults = {"influence_speed": 1.0, "coupling": 1.0}

    def _validate(self):
        if not self.params["influence_speed"] > 0:
            raise InvalidWorldSpec("influence_contrast.influence_speed must be > 0")
        if not 0.0 <= self.params["coupling"] <= 1.0:
            raise InvalidWorldSpec("influence_contrast.coupling must lie in [0, 1]")

    def _prepare(self, g, u):
        z = 2.0 * u[:, 0] - 1.0
        phi = 2.0 * math.pi * u[:, 1]
        r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)

    def influence_reaches_second(self, p: dict[str, float]) -> bool:
        t_first, t_second = sorted((p["t1"], p["t2"]))
        return t_first + abs(p["x2"] - p["x1"]) / self.params["influence_speed"] <= t_second

    def _emit(self, g, hidden, mes, u):
        p = self.measurement_params(mes)
        na, nb = _plane_axis(p["a"]), _plane_axis(p["b"])
        s1 = np.where(hidden @ na >= 0, 1.0, -1.0)
        s2 = np.where(hidden @ nb >= 0, -1.0, 1.0)
        if self.influence_reaches_second(p):
            theta = math.acos(max(-1.0, min(1.0, float(na @ nb))))
            steered = u[:, 1] < self.params["coupling"]
            anti = u[:, 0] < math.cos(theta / 2) ** 2
            if p["t1"] <= p["t2"]:
                s2 = np.where(steered, np.where(anti, -s1, s1), s2)
            else:
                s1 = np.where(steered, np.where(anti, -s2, s2), s1)
        return self._pair_marks(g, p, s1, s2, u[:, 2], u[:, 3], mes.label)
