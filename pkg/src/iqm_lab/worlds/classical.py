"""Classical control worlds: a die and a pair of independent coins."""

from __future__ import annotations

import numpy as np

from ..coding import Box, CodingRule, binned_rule, sign_rule
from ..errors import InvalidWorldSpec
from ..marks import MarkBatch
from ..ops import GenerationOp, MeasurementSpec
from .base import World, jitter


class ClassicalDie(World):
    """A die with ``faces`` equally likely faces; reading leaves one mark in the face's zone."""

    kind = "classical_die"
    spec_defaults = {"faces": 6.0}
    mes_defaults = {"read": {}}

    def _validate(self):
        f = self.params["faces"]
        if f != int(f) or f < 2:
            raise InvalidWorldSpec(f"classical_die.faces must be an integer >= 2, got {f}")
        self.faces = int(f)

    def default_generation(self) -> GenerationOp:
        return self.generation("cast")

    def catalog(self):
        return [(MeasurementSpec.make("read", name="read"), "read")]

    def _prepare(self, g, u):
        return np.minimum((u[:, 0] * self.faces).astype(np.int64) + 1, self.faces)

    def _emit(self, g, hidden, mes, u):
        self.measurement_params(mes)
        n = len(hidden)
        coords = np.zeros((n, 1, 4))
        coords[:, 0, 0] = hidden - 1 + jitter(u[:, 0])
        coords[:, 0, 1] = 0.5
        coords[:, 0, 3] = g.ready_time + 1.0
        return MarkBatch(("table",), coords, np.full((n, 1), np.nan), mes.label)

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        self.measurement_params(mes)
        edges = np.arange(self.faces + 1, dtype=float)
        return binned_rule(
            "read",
            edges,
            values=[float(j) for j in range(1, self.faces + 1)],
            labels=[str(j) for j in range(1, self.faces + 1)],
            base=Box().restrict("y", 0.0, 1.0),
        )

    def envelope(self, g, mes):
        return float(self.faces), 1.0


class CoinPair(World):
    """Two coins tossed independently; one joint reading marks both.

    ``+1`` stands for heads.  Used as the classical control for factorization
    and independence checks on a product universe.
    """

    kind = "coin_pair"
    spec_defaults = {"bias_1": 0.5, "bias_2": 0.5}
    mes_defaults = {"read_pair": {}}

    def _validate(self):
        for k in ("bias_1", "bias_2"):
            if not 0.0 <= self.params[k] <= 1.0:
                raise InvalidWorldSpec(f"coin_pair.{k} must lie in [0, 1]")

    def default_generation(self) -> GenerationOp:
        return self.generation("toss")

    def catalog(self):
        return [(MeasurementSpec.make("read_pair", name="read_pair"), "read_pair")]

    def _prepare(self, g, u):
        s1 = np.where(u[:, 0] < self.params["bias_1"], 1.0, -1.0)
        s2 = np.where(u[:, 1] < self.params["bias_2"], 1.0, -1.0)
        return np.stack([s1, s2], axis=1)

    def _emit(self, g, hidden, mes, u):
        self.measurement_params(mes)
        n = len(hidden)
        coords = np.zeros((n, 2, 4))
        coords[:, 0, 0], coords[:, 1, 0] = -1.0, 1.0
        coords[:, 0, 1] = hidden[:, 0] * jitter(u[:, 0])
        coords[:, 1, 1] = hidden[:, 1] * jitter(u[:, 1])
        coords[:, :, 3] = g.ready_time + 1.0
        return MarkBatch(("coin1", "coin2"), coords, np.full((n, 2), np.nan), mes.label)

    def default_rule(self, mes, g=None, bins=None) -> CodingRule:
        self.measurement_params(mes)
        return sign_rule("read_pair", n_marks=2)

    def envelope(self, g, mes):
        return 1.0, 1.0
