"""Gaussian wave-packet worlds (hbar = 1): a free particle and a two-slit source."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtri

from ..coding import Box, CodingRule, Region, SpectrumValue, bin_centers, binned_rule, open_edges
from ..errors import IncompatibleMeasurementSpec, InvalidGenerationParams, InvalidWorldSpec, NotComposable
from ..marks import MarkBatch
from ..ops import GenerationOp, MeasurementSpec
from .base import DEFAULT_BINS, World

_TINY = 2.0**-60


def _normals(u: np.ndarray) -> np.ndarray:
    return ndtri(np.clip(u, _TINY, 1.0 - _TINY))


class FreeParticle(World):
    """A minimum-uncertainty Gaussian packet of mass ``mass`` and initial width ``sigma0``.

    Generation parameters place the packet centre ``(x0, y0, z0)`` and give its
    mean momentum ``(px, py, pz)``.  Two measurements exist: ``position``
    after a delay ``t``, and ``momentum_tof``, a time-of-flight arrangement
    with a screen impact and a chronometer reading after flight time ``t``.
    """

    kind = "free_particle"
    is_quantum = True
    spec_defaults = {"mass": 1.0, "sigma0": 1.0}
    gen_defaults = {"x0": 0.0, "y0": 0.0, "z0": 0.0, "px": 0.0, "py": 0.0, "pz": 0.0}
    mes_defaults = {"position": {"t": 1.0}, "momentum_tof": {"t": 100.0}}
    environments = frozenset({"free_flight", "constant_field"})

    def _validate(self):
        for k in ("mass", "sigma0"):
            if not self.params[k] > 0:
                raise InvalidWorldSpec(f"free_particle.{k} must be > 0")

    def default_generation(self):
        return self.generation("source")

    def catalog(self):
        return [
            (MeasurementSpec.make("position", name="position", t=1.0), "position(t=1)"),
            (MeasurementSpec.make("momentum_tof", name="momentum_tof", t=100.0), "momentum_tof(t=100)"),
        ]

    def _classify(self, label, p):
        if not p["t"] > 0:
            raise IncompatibleMeasurementSpec(f"{label}: t must be > 0")
        return f"{label}(t={p['t']:g})"

    def _packet(self, g: GenerationOp) -> np.ndarray:
        p = self.gen_params(g)
        m = self.params["mass"]
        c = np.array([p["x0"], p["y0"], p["z0"]])
        mom = np.array([p["px"], p["py"], p["pz"]])
        elapsed = 0.0
        for env, dt in g.evolution:
            force = np.array([env.p.get(k, 0.0) for k in ("fx", "fy", "fz")]) if env.name == "constant_field" else 0.0
            c = c + mom * dt / m + force * dt * dt / (2 * m)
            mom = mom + force * dt
            elapsed += dt
        return np.concatenate([c, mom, [elapsed]])

    def position_law(self, g: GenerationOp, t: float) -> tuple[np.ndarray, float]:
        """Mean position and per-axis standard deviation ``t`` after the exemplar is ready."""
        h = self._packet(g)
        m, s0 = self.params["mass"], self.params["sigma0"]
        total = h[6] + t
        return h[:3] + h[3:6] * t / m, math.sqrt(s0 * s0 + (total / (2 * m * s0)) ** 2)

    def _prepare(self, g, u):
        return np.broadcast_to(self._packet(g), (len(u), 7))

    def _emit(self, g, hidden, mes, u):
        p = self.measurement_params(mes)
        self._classify(mes.label, p)
        m, s0, t = self.params["mass"], self.params["sigma0"], p["t"]
        mean = hidden[:, :3] + hidden[:, 3:6] * t / m
        sd = np.sqrt(s0 * s0 + ((hidden[:, 6] + t) / (2 * m * s0)) ** 2)
        pos = mean + sd[:, None] * _normals(u[:, :3])
        n = len(hidden)
        t_mark = g.ready_time + t
        if mes.label == "position":
            coords = np.empty((n, 1, 4))
            coords[:, 0, :3], coords[:, 0, 3] = pos, t_mark
            return MarkBatch(("detector",), coords, np.full((n, 1), np.nan), mes.label)
        coords = np.zeros((n, 2, 4))
        coords[:, 0, :3] = pos
        coords[:, :, 3] = t_mark
        payload = np.full((n, 2), np.nan)
        payload[:, 1] = t_mark
        return MarkBatch(("screen", "chrono"), coords, payload, mes.label)

    def tof_frame(self, g: GenerationOp, mes: MeasurementSpec) -> tuple[np.ndarray, float, float]:
        """Origin of the displacement, start time ``t0`` and chronometer time of a time-of-flight run."""
        p = self.gen_params(g)
        t = self.measurement_params(mes)["t"]
        return np.array([p["x0"], p["y0"], p["z0"]]), g.support.duration, g.ready_time + t

    def momentum_rule(self, g: GenerationOp, mes: MeasurementSpec, edges: dict[str, np.ndarray]) -> CodingRule:
        """Momentum bins mapped onto impact boxes at the chronometer time.

        With a fixed flight time ``dt`` the momentum ``m d / dt`` lies in
        ``[p_lo, p_hi)`` exactly when the impact lies in
        ``[origin + p_lo dt / m, origin + p_hi dt / m)``.
        """
        origin, t0, tn = self.tof_frame(g, mes)
        m, dt = self.params["mass"], tn - t0
        axes = list(edges)
        k_axis = {"x": 0, "y": 1, "z": 2}
        delta = 1e-9 * max(1.0, abs(tn))
        chrono = Box().restrict("t", tn - delta, tn + delta)
        grids = [np.asarray(edges[a], dtype=float) for a in axes]
        centers = [bin_centers(e) for e in grids]
        shape = [len(e) - 1 for e in grids]
        spectrum, regions = [], []
        for j, multi in enumerate(np.ndindex(*shape), start=1):
            box = Box().restrict("t", tn - delta, tn + delta)
            for a, e, i in zip(axes, grids, multi):
                o = origin[k_axis[a]]
                box = box.restrict(a, o + e[i] * dt / m, o + e[i + 1] * dt / m)
            vals = tuple(float(c[i]) for c, i in zip(centers, multi))
            value = vals[0] if len(vals) == 1 else vals
            spectrum.append(SpectrumValue(j, value, ",".join(f"{v:.6g}" for v in vals)))
            regions.append(Region(f"p{multi}", (box, chrono), j))
        return CodingRule("momentum_tof", tuple(regions), tuple(spectrum))

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        g = g or self.default_generation()
        bins = bins or DEFAULT_BINS
        p = self.measurement_params(mes)
        mean, sd = self.position_law(g, p["t"])
        if mes.label == "position":
            return binned_rule("position", open_edges(mean[0] - 4 * sd, mean[0] + 4 * sd, bins), axis="x")
        origin, t0, tn = self.tof_frame(g, mes)
        scale = self.params["mass"] / (tn - t0)
        centre = scale * (mean[0] - origin[0])
        return self.momentum_rule(g, mes, {"x": open_edges(centre - 4 * scale * sd, centre + 4 * scale * sd, bins)})

    def envelope(self, g, mes):
        t = self.measurement_params(mes)["t"]
        mean, sd = self.position_law(g, t)
        return float(np.linalg.norm(mean) + 4 * sd), t


@lru_cache(maxsize=64)
def _screen_sampler(amp1: float, amp2: float, phase: float, t: float, mass: float, sigma0: float, sep: float):
    tau = t / (2 * mass * sigma0**2)
    sigma_t = sigma0 * math.sqrt(1 + tau * tau)
    half = sep / 2 + 10 * sigma_t
    xs = np.linspace(-half, half, (1 << 16) + 1)
    dens = np.abs(_amplitude(xs, amp1, amp2 * np.exp(1j * phase), tau, sigma0, sep)) ** 2
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2)])
    cdf /= cdf[-1]
    return xs, cdf


def _amplitude(x, c1, c2, tau, sigma0, sep):
    q = 1 + 1j * tau
    norm = (2 * math.pi * sigma0**2) ** -0.25 / np.sqrt(q)

    def packet(centre):
        return norm * np.exp(-((x - centre) ** 2) / (4 * sigma0**2 * q))

    return c1 * packet(-sep / 2) + c2 * packet(sep / 2)


class DoubleSlit(World):
    """Two Gaussian sources of width ``sigma0`` a distance ``separation`` apart.

    A generation sets the amplitude of each route (``amp1``, ``amp2``) and the
    relative phase of route 2.  ``screen`` records the impact abscissa after
    flight time ``t``.  Single-route generations compose into a two-route one
    by adding amplitudes.
    """

    kind = "double_slit"
    is_quantum = True
    spec_defaults = {"mass": 1.0, "sigma0": 1.0, "separation": 40.0, "flight_time": 200.0}
    gen_defaults = {"amp1": 1.0, "amp2": 1.0, "phase": 0.0}
    mes_defaults = {"screen": {"t": 200.0}}
    environments = frozenset({"free_flight"})

    def _validate(self):
        for k in ("mass", "sigma0", "separation", "flight_time"):
            if not self.params[k] > 0:
                raise InvalidWorldSpec(f"double_slit.{k} must be > 0")

    def _check_gen(self, p):
        for k in ("amp1", "amp2"):
            if p[k] < 0:
                raise InvalidGenerationParams(k, "amplitudes are >= 0; use phase for signs")
        if p["amp1"] == 0 and p["amp2"] == 0:
            raise InvalidGenerationParams("amp1", "at least one route must be open")

    def measurement_params(self, mes):
        p = super().measurement_params(mes)
        if "t" not in mes.p:
            p["t"] = self.params["flight_time"]
        if not p["t"] > 0:
            raise IncompatibleMeasurementSpec("screen: t must be > 0")
        return p

    def slit(self, k: int, label: str | None = None) -> GenerationOp:
        """Generation through route ``k`` alone."""
        amps = {"amp1": 1.0 if k == 1 else 0.0, "amp2": 1.0 if k == 2 else 0.0}
        return self.generation(label or f"G{k}", **amps)

    def default_generation(self):
        return self.compose(self.slit(1), self.slit(2))

    def compose(self, g1, g2, label=None):
        for g in (g1, g2):
            self.check_generation(g)
            if g.evolution:
                raise NotComposable(f"{g} has already evolved; compose before evolving")
        p1, p2 = self.gen_params(g1), self.gen_params(g2)
        c1 = p1["amp1"] + p2["amp1"]
        c2 = p1["amp2"] * np.exp(1j * p1["phase"]) + p2["amp2"] * np.exp(1j * p2["phase"])
        if c1 == 0 and abs(c2) < 1e-15:
            raise NotComposable("the composed amplitudes cancel")
        params = {"amp1": float(c1), "amp2": float(abs(c2)), "phase": float(np.angle(c2)) if abs(c2) > 0 else 0.0}
        base = GenerationOp.make(self.world_id, label or f"G({g1.label},{g2.label})", None, **params)
        return GenerationOp(base.world_id, base.label, base.params, g1.support, components=(g1, g2))

    def catalog(self):
        return [(MeasurementSpec.make("screen", name="screen"), "screen")]

    def geometry(self, g: GenerationOp, t: float) -> dict[str, float]:
        """Envelope width, fringe spacing and flight parameter at total flight time."""
        elapsed = sum(dt for _, dt in g.evolution)
        total = elapsed + t
        m, s0, sep = self.params["mass"], self.params["sigma0"], self.params["separation"]
        tau = total / (2 * m * s0 * s0)
        sigma_t = s0 * math.sqrt(1 + tau * tau)
        return {"tau": tau, "sigma_t": sigma_t, "fringe_spacing": 4 * math.pi * sigma_t**2 / (sep * tau), "total_time": total}

    def analytic_visibility(self, g: GenerationOp) -> float:
        """Fringe visibility of the ideal far-field pattern, ``2|c1||c2| / (|c1|^2 + |c2|^2)``."""
        p = self.gen_params(g)
        return 2 * p["amp1"] * p["amp2"] / (p["amp1"] ** 2 + p["amp2"] ** 2)

    def _prepare(self, g, u):
        p = self.gen_params(g)
        elapsed = sum(dt for _, dt in g.evolution)
        return np.broadcast_to(np.array([p["amp1"], p["amp2"], p["phase"], elapsed]), (len(u), 4))

    def _emit(self, g, hidden, mes, u):
        t = self.measurement_params(mes)["t"]
        n = len(hidden)
        x = np.empty(n)
        rows, inverse = np.unique(hidden, axis=0, return_inverse=True)
        for r, row in enumerate(rows):
            xs, cdf = _screen_sampler(
                float(row[0]), float(row[1]), float(row[2]), float(row[3] + t),
                self.params["mass"], self.params["sigma0"], self.params["separation"],
            )
            sel = inverse.reshape(-1) == r
            x[sel] = np.interp(u[sel, 0], cdf, xs)
        coords = np.zeros((n, 1, 4))
        coords[:, 0, 0] = x
        coords[:, 0, 3] = g.ready_time + t
        return MarkBatch(("screen",), coords, np.full((n, 1), np.nan), mes.label)

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        """Screen bins; by default eight per fringe with one bin centred on the axis."""
        g = g or self.default_generation()
        geo = self.geometry(g, self.measurement_params(mes)["t"])
        half = self.params["separation"] / 2 + 4 * geo["sigma_t"]
        if bins:
            return binned_rule("screen", open_edges(-half, half, bins), axis="x")
        w = geo["fringe_spacing"] / 8
        m = math.ceil(half / w)
        edges = (np.arange(-m, m + 2) - 0.5) * w
        edges[0], edges[-1] = -math.inf, math.inf
        return binned_rule("screen", edges, axis="x", values=[float(k * w) for k in range(-m, m + 1)])

    def envelope(self, g, mes):
        t = self.measurement_params(mes)["t"]
        return self.params["separation"] / 2 + 4 * self.geometry(g, t)["sigma_t"], t
