"""Centralized ground truth: one node holding every oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CutCollection, CutOrigin, box_basis
from ..minnorm import SolverError, solve_min_norm
from ..oracles import Column


class ReferenceError(RuntimeError):
    """The centralized loop did not reach the requested tolerance."""


@dataclass(frozen=True, eq=False)
class ReferenceSolution:
    z: np.ndarray
    gamma: float
    max_slack: float
    oracle_calls: int
    iterations: int
    columns: tuple = ()

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.z, dtype=dtype)


def reference_solve(instance, c=None, tol: float = 1e-9, max_calls: int = 100_000,
                    pool_cap: int | None = None, keep_columns: bool = False) -> ReferenceSolution:
    """Min-norm optimizer of the full problem by an exchange loop.

    Every iteration queries all oracles at the current min-norm point of a
    cut pool and adds every cut. Stops once no cut lies farther than ``tol``
    from the query point (violation over cut-normal norm; this matches the
    feasibility tolerance of the LP engine, which works on normalized cuts).
    The slackest cuts are evicted when the pool exceeds ``pool_cap``; the box
    cuts are always kept.
    """
    c = np.asarray(instance.c if c is None else c, dtype=float)
    d = int(instance.d)
    oracles = instance.oracles(tol_mem=tol)
    box = box_basis(d, instance.M)
    pool = box
    cap = pool_cap or max(400, 60 * d)
    calls, it = 0, 0
    columns = []
    warm = None
    while True:
        it += 1
        sol = solve_min_norm(pool, c, warm=warm)
        if not sol.optimal:
            raise SolverError(f"reference program is {sol.status.value}")
        z = sol.z_star
        new, worst = [], -np.inf
        for k, o in enumerate(oracles):
            rep = o(z)
            calls += 1
            if not rep.inside:
                worst = max(worst, rep.s / np.linalg.norm(rep.cut.a))
            if keep_columns and isinstance(rep.witness, Column):
                columns.append(rep.witness)
            if not rep.inside:
                new.append((rep.cut, CutOrigin(k, it, 0)))
        if worst <= tol:
            return ReferenceSolution(z, sol.gamma, max(worst, 0.0), calls, it, tuple(columns))
        if calls >= max_calls:
            raise ReferenceError(f"no convergence after {calls} oracle calls (violation {worst:.3g})")
        added = CutCollection([h.a for h, _ in new], [h.b for h, _ in new], [o for _, o in new])
        if len(pool) + len(added) > cap:
            slack = pool.slacks(z)[2 * d:]
            keep = np.argsort(-slack, kind="stable")[: (3 * cap) // 4]
            pool = box.union(pool.subset(2 * d + np.sort(keep)))
        # basis cuts first so they seed the simplex
        support = sol.support if len(pool) == sol.lp_dual.size else None
        if support is not None:
            rest = np.setdiff1d(np.arange(len(pool)), support)
            pool = pool.subset(np.concatenate([support, rest]))
            warm = np.arange(support.size)
        else:
            warm = None
        pool = pool.union(added)
