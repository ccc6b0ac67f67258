"""Small almost-separable problems with closed-form block responses.

Block ``i`` chooses ``x_i`` in a box and pays a separable convex quadratic;
the blocks are coupled by ``sum_i G_i x_i = h``. The protocol runs on the
dual variables ``z = (pi, u)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DEFAULT_TOL
from ..oracles import ColGenConstraint
from .base import InstanceError, ProblemInstance


def _clip_response(qd, ql, lo, hi):
    """Minimizer of ``0.5 qd x^2 + (ql + w) x`` over ``[lo, hi]``, vectorized in ``x``."""

    def solve(w):
        g = ql + w
        x = np.where(g > 0, lo, hi).astype(float)
        pos = qd > 0
        x[pos] = np.clip(-g[pos] / qd[pos], lo[pos], hi[pos])
        flat = (~pos) & (g == 0)
        x[flat] = lo[flat]
        return x

    return solve


@dataclass(eq=False)
class SeparableInstance(ProblemInstance):
    """``min sum_i 0.5 x_i' diag(qd_i) x_i + ql_i . x_i`` s.t. ``sum G_i x_i = h``, ``lo_i <= x_i <= hi_i``."""

    G: list
    qd: list
    ql: list
    lo: list
    hi: list
    h: np.ndarray
    M: float = 1e3
    seed: int | None = None
    kind = "separable"

    def __post_init__(self):
        self.G = [np.array(g, dtype=float, ndmin=2) for g in self.G]
        self.qd = [np.array(v, dtype=float).ravel() for v in self.qd]
        self.ql = [np.array(v, dtype=float).ravel() for v in self.ql]
        self.lo = [np.array(v, dtype=float).ravel() for v in self.lo]
        self.hi = [np.array(v, dtype=float).ravel() for v in self.hi]
        self.h = np.array(self.h, dtype=float).ravel()
        for i, g in enumerate(self.G):
            m = g.shape[1]
            if g.shape[0] != self.h.size:
                raise InstanceError(f"G_{i} has {g.shape[0]} rows, h has {self.h.size}")
            if not all(v.size == m for v in (self.qd[i], self.ql[i], self.lo[i], self.hi[i])):
                raise InstanceError(f"block {i} data have inconsistent sizes")
            if np.any(self.lo[i] > self.hi[i]) or np.any(self.qd[i] < 0):
                raise InstanceError(f"block {i} has an empty box or a nonconvex cost")

    @property
    def r(self) -> int:
        return self.h.size

    @property
    def n(self) -> int:
        return len(self.G)

    @property
    def d(self) -> int:
        return self.r + self.n

    @property
    def c(self) -> np.ndarray:
        return np.concatenate([-self.h, np.ones(self.n)])

    def cost(self, i, x) -> float:
        return float(0.5 * self.qd[i] @ (x * x) + self.ql[i] @ x)

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem):
        out = []
        for i in range(self.n):
            solve = _clip_response(self.qd[i], self.ql[i], self.lo[i], self.hi[i])
            cost = (lambda i: (lambda x: self.cost(i, x)))(i)
            out.append(ColGenConstraint(solve, cost, self.G[i], i, self.n, tol_mem))
        return out

    def dual_function(self, pi) -> float:
        """``q(pi) = -h.pi + sum_i min_x f_i(x) + pi . G_i x``."""
        pi = np.asarray(pi, dtype=float)
        return float(-self.h @ pi + sum(o.best_response(pi)[1] for o in self.oracles()))

    def feasible_point(self):
        pi = np.zeros(self.r)
        u = np.array([o.best_response(pi)[1] for o in self.oracles()])
        return np.concatenate([pi, u])

    def sample_feasible(self, rng, k):
        """Random ``pi`` with ``u_i`` below ``gamma_i*(pi)``."""
        ors = self.oracles()
        out = np.empty((k, self.d))
        for j in range(k):
            pi = rng.normal(scale=3.0, size=self.r)
            u = np.array([o.best_response(pi)[1] for o in ors])
            u -= rng.exponential(size=self.n) * (rng.uniform() < 0.5)
            out[j] = np.concatenate([pi, u])
        return out

    def to_dict(self):
        L = lambda xs: [np.asarray(x).tolist() for x in xs]
        return {"kind": self.kind, "G": L(self.G), "qd": L(self.qd), "ql": L(self.ql),
                "lo": L(self.lo), "hi": L(self.hi), "h": self.h.tolist(), "M": self.M,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, data):
        return cls(data["G"], data["qd"], data["ql"], data["lo"], data["hi"], data["h"],
                   float(data.get("M", 1e3)), data.get("seed"))


def gen_separable(r: int, n: int, seed: int, M: float = 1e3) -> SeparableInstance:
    """Random toy instance with ``h`` inside the reachable set (Slater point)."""
    if r < 1 or n < 1:
        raise InstanceError("need r >= 1 and n >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 13])))
    G, qd, ql, lo, hi = [], [], [], [], []
    h = np.zeros(r)
    for _ in range(n):
        m = int(rng.integers(1, 4))
        g = rng.normal(size=(r, m))
        q = rng.uniform(0.5, 2.0, size=m) * (rng.uniform(size=m) < 0.8)
        G.append(g)
        qd.append(q)
        ql.append(rng.normal(size=m))
        lo.append(-rng.uniform(0.5, 2.0, size=m))
        hi.append(rng.uniform(0.5, 2.0, size=m))
        x0 = lo[-1] + (hi[-1] - lo[-1]) * rng.uniform(0.25, 0.75, size=m)
        h += g @ x0
    if np.linalg.matrix_rank(np.hstack(G)) < r:
        # rank-deficient coupling makes the dual unbounded; add an identity block
        G.append(np.eye(r))
        qd.append(np.ones(r))
        ql.append(np.zeros(r))
        lo.append(-np.ones(r))
        hi.append(np.ones(r))
    return SeparableInstance(G, qd, ql, lo, hi, h, M, seed)
