"""Convex inequality-constrained instances: ellipsoids and polyhedra."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DEFAULT_TOL
from ..oracles import AffineMax, QuadraticConstraint
from .base import InstanceError, ProblemInstance


@dataclass(eq=False)
class InequalityInstance(ProblemInstance):
    """Each node holds one set ``{f(z) <= 0}``.

    ``sets`` is a list of dicts, either
    ``{"type": "ellipsoid", "Q": ..., "center": ..., "r": ...}`` or
    ``{"type": "polyhedron", "A": ..., "b": ...}``.
    """

    sets: list
    c: np.ndarray
    M: float = 100.0
    seed: int | None = None
    kind = "inequality"

    def __post_init__(self):
        self.c = np.array(self.c, dtype=float).ravel()
        if not self.sets:
            raise InstanceError("need at least one constraint set")
        for s in self.sets:
            if s.get("type") not in ("ellipsoid", "polyhedron"):
                raise InstanceError(f"unknown set type {s.get('type')!r}")

    @property
    def d(self) -> int:
        return self.c.size

    @property
    def n(self) -> int:
        return len(self.sets)

    def _make(self, s, tol_mem):
        if s["type"] == "ellipsoid":
            return QuadraticConstraint(s["Q"], s["center"], s["r"], tol_mem)
        return AffineMax(s["A"], s["b"], tol_mem)

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem):
        return [self._make(s, tol_mem) for s in self.sets]

    def feasible_point(self):
        return np.zeros(self.d)

    def sample_feasible(self, rng, k):
        ors = self.oracles()
        out = np.empty((k, self.d))
        for j in range(k):
            u = rng.normal(size=self.d)
            u /= np.linalg.norm(u)
            lo, hi = 0.0, self.M
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if all(o.value(mid * u) <= 0 for o in ors):
                    lo = mid
                else:
                    hi = mid
            out[j] = rng.uniform() * lo * u
        return out

    def to_dict(self):
        def enc(s):
            return {k: (np.asarray(v).tolist() if k != "type" else v) for k, v in s.items()}
        return {"kind": self.kind, "sets": [enc(s) for s in self.sets], "c": self.c.tolist(),
                "M": self.M, "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        return cls(list(data["sets"]), data["c"], float(data.get("M", 100.0)), data.get("seed"))


def gen_inequality(d: int, n: int, seed: int, M: float = 100.0) -> InequalityInstance:
    """Random ellipsoids and small polyhedra that all contain the origin.

    At least one set is an ellipsoid so the intersection is bounded.
    """
    if d < 1 or n < 1:
        raise InstanceError("need d >= 1 and n >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 11])))
    sets = []
    for i in range(n):
        if i == 0 or rng.uniform() < 0.6:
            L = rng.normal(size=(d, d))
            Q = L @ L.T / d + 0.5 * np.eye(d)
            center = rng.uniform(-0.5, 0.5, size=d)
            # origin strictly inside
            r = float(np.sqrt(center @ Q @ center)) + rng.uniform(0.5, 2.0)
            sets.append({"type": "ellipsoid", "Q": Q, "center": center, "r": r})
        else:
            k = int(rng.integers(1, d + 2))
            A = rng.normal(size=(k, d))
            b = rng.uniform(0.3, 1.5, size=k) * np.linalg.norm(A, axis=1)
            sets.append({"type": "polyhedron", "A": A, "b": b})
    c = rng.normal(size=d)
    return InequalityInstance(sets, c, M, seed)
