"""Primal recovery for almost-separable problems.

After the dual variables have converged, every block's primal decision is a
convex combination of the columns its node generated. The weights solve the
restricted master LP

    min  sum_{i,t} fbar_it lam_it
    s.t. sum_{i,t} Gbar_it lam_it = h,  sum_t lam_it = 1,  lam >= 0,

whose LP dual is exactly the approximate program over the generated cuts.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .oracles import Column


class InsufficientColumns(RuntimeError):
    """The restricted master LP is infeasible: run more rounds."""


@dataclass
class ColumnLog:
    """Generated columns per block; ``columns[i]`` is a list of :class:`Column`."""

    n: int
    columns: dict = field(default_factory=dict)

    def add(self, i: int, col: Column):
        self.columns.setdefault(int(i), []).append(col)

    def __len__(self):
        return sum(len(v) for v in self.columns.values())

    @classmethod
    def from_nodes(cls, nodes) -> "ColumnLog":
        log = cls(len(nodes))
        for nd in nodes:
            for _, col in nd.history:
                log.add(nd.id, col)
        return log

    def verify(self, units, tol: float = 1e-7) -> bool:
        """Every logged ``x`` lies in its block's feasible set."""
        return all(units[i].contains(col.x, tol) for i, cols in self.columns.items() for col in cols)


@dataclass(frozen=True, eq=False)
class RecoveredPrimal:
    lam: dict
    x_star: dict
    total_cost: float
    master_value: float
    residual: float
    pi: np.ndarray
    u: np.ndarray


def recover(log: ColumnLog, h, cost=None) -> RecoveredPrimal:
    """Solve the restricted master LP and assemble ``x*_i = sum_t lam_it xbar_it``.

    ``cost(i, x)`` evaluates ``f_i``; without it the total cost is the master
    LP value (exact for linear costs).
    """
    h = np.asarray(h, dtype=float).ravel()
    r, n = h.size, log.n
    missing = [i for i in range(n) if not log.columns.get(i)]
    if missing:
        raise InsufficientColumns(f"no columns for blocks {missing[:10]}")
    owner, gx, fbar, cols = [], [], [], []
    for i in range(n):
        for col in log.columns[i]:
            gx.append(col.Gx)
            fbar.append(col.cost)
            owner.append(i)
            cols.append(col)
    m = len(cols)
    owner = np.array(owner)
    # equality rows: sum G lam = h, then one convexity row per block
    conv = sparse.csr_matrix((np.ones(m), (owner, np.arange(m))), shape=(n, m))
    A_eq = sparse.vstack([sparse.csr_matrix(np.array(gx).T), conv], format="csr")
    b_eq = np.concatenate([h, np.ones(n)])
    res = linprog(np.array(fbar), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 2:
        raise InsufficientColumns("restricted master LP is infeasible")
    if res.status != 0:
        raise RuntimeError(f"restricted master LP failed: {res.message}")
    y = res.x
    b = np.array(fbar)
    nu = res.eqlin.marginals
    z = np.concatenate([-nu[:r], nu[r:]])
    y = np.maximum(y, 0.0)
    lam, xs = {}, {}
    for i in range(n):
        idx = np.flatnonzero(owner == i)
        w = y[idx] / y[idx].sum()
        lam[i] = w
        xs[i] = sum(wk * cols[k].x for wk, k in zip(w, idx))
    inj = sum(cols[k].Gx * y[k] for k in range(m))
    residual = float(np.abs(inj - h).max())
    master = float(b @ y)
    total = master if cost is None else float(sum(cost(i, xs[i]) for i in range(n)))
    return RecoveredPrimal(lam, xs, total, master, residual, z[:r].copy(), z[r:].copy())


def cost_gap(recovered: RecoveredPrimal, dual_value: float) -> float:
    """Primal cost minus a dual value; nonnegative by weak duality."""
    return float(recovered.total_cost - dual_value)


def schedule_csv(recovered: RecoveredPrimal, G_maps, path=None, names=None) -> str:
    """Per-unit, per-period net injection ``G_i x*_i`` as CSV (unit, period, power)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "period", "power"])
    for i in sorted(recovered.x_star):
        p = np.asarray(G_maps[i]) @ recovered.x_star[i]
        name = names[i] if names else i
        for t, v in enumerate(p, start=1):
            w.writerow([name, t, repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
