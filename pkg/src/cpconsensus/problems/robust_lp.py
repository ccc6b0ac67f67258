"""Robust linear programs with ellipsoidal row uncertainty."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DEFAULT_TOL
from ..oracles import robust_linear_row
from .base import InstanceError, ProblemInstance


@dataclass(eq=False)
class RobustLpInstance(ProblemInstance):
    """``max c.z`` s.t. ``a.z <= b_i`` for all ``a`` in ``{abar_i + P_i u : |u| <= 1}``.

    Node ``i`` owns row ``i``. The robust row is the second-order cone
    constraint ``abar_i . z + |P_i^T z| <= b_i``.
    """

    abar: np.ndarray
    P: np.ndarray
    b: np.ndarray
    c: np.ndarray
    M: float = 1e3
    seed: int | None = None

    kind = "robust_lp"

    def __post_init__(self):
        self.abar = np.array(self.abar, dtype=float, ndmin=2)
        self.b = np.array(self.b, dtype=float).ravel()
        self.c = np.array(self.c, dtype=float).ravel()
        n, d = self.abar.shape
        self.P = np.array(self.P, dtype=float).reshape(n, d, d)
        if self.b.size != n or self.c.size != d:
            raise InstanceError("robust LP data have inconsistent shapes")
        if np.abs(self.P - self.P.transpose(0, 2, 1)).max(initial=0.0) > 1e-9:
            raise InstanceError("P_i must be symmetric")
        if not self.M > 0:
            raise InstanceError("box half-width must be positive")

    @property
    def d(self) -> int:
        return self.abar.shape[1]

    @property
    def n(self) -> int:
        return self.abar.shape[0]

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem):
        return [robust_linear_row(self.abar[i], self.P[i], self.b[i], tol_mem) for i in range(self.n)]

    def worst_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.abar @ z + np.linalg.norm(np.einsum("kij,i->kj", self.P, z), axis=1) - self.b

    def feasible_point(self):
        return np.zeros(self.d)

    def sample_feasible(self, rng, k):
        """Points ``t * z`` on random rays through the origin, ``t`` uniform
        below the exit point found by bisection (and the box)."""
        out = np.empty((k, self.d))
        for j in range(k):
            u = rng.normal(size=self.d)
            u /= np.linalg.norm(u)
            lo, hi = 0.0, self.M
            if np.all(self.worst_values(hi * u) <= 0) and np.all(np.abs(hi * u) <= self.M):
                tmax = hi
            else:
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if np.all(self.worst_values(mid * u) <= 0):
                        lo = mid
                    else:
                        hi = mid
                tmax = lo
            out[j] = rng.uniform() * tmax * u
        return out

    def to_dict(self):
        return {"kind": self.kind, "abar": self.abar.tolist(), "P": self.P.tolist(),
                "b": self.b.tolist(), "c": self.c.tolist(), "M": self.M, "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        return cls(data["abar"], data["P"], data["b"], data["c"], float(data.get("M", 1e3)),
                   data.get("seed"))


def gen_dunham_robust_lp(d: int, n: int, seed: int, M: float = 1e3) -> RobustLpInstance:
    """Random robust LP.

    ``abar_i`` and ``c`` have i.i.d. N(0, 10^2) entries, ``b_i = |abar_i|``,
    and ``P_i = M_i^T M_i`` with i.i.d. N(0, 1) entries in ``M_i``.
    """
    if d < 1 or n < 1:
        raise InstanceError("need d >= 1 and n >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 7])))
    abar = rng.normal(0.0, 10.0, size=(n, d))
    c = rng.normal(0.0, 10.0, size=d)
    b = np.linalg.norm(abar, axis=1)
    Ms = rng.normal(size=(n, d, d))
    P = np.einsum("kji,kjl->kil", Ms, Ms)
    P = 0.5 * (P + P.transpose(0, 2, 1))
    return RobustLpInstance(abar, P, b, c, M, seed)
