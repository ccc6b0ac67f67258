"""Minimal 2-norm solutions of the cut LP and basis extraction.

The LP ``max c.z s.t. A z <= b`` is solved first (dual simplex); if its
optimizer is not unique, the minimal-norm point of the optimal face is then
found by projecting the origin onto that face with an active-set QP.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import DEFAULT_TOL, CutCollection, Tolerances


class Status(enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


class SolverError(RuntimeError):
    """The LP/QP engine hit its iteration cap or produced bad residuals."""

    def __init__(self, message, **residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SolverStats:
    lp_iterations: int
    qp_iterations: int = 0
    projected: bool = False
    warm_started: bool = False
    max_violation: float = 0.0


@dataclass(frozen=True, eq=False)
class ApproxLpSolution:
    """Result of :func:`solve_min_norm`.

    ``lp_dual`` is an optimal dual vector of the LP (one entry per cut) and
    ``qp_dual`` the multipliers of the projection step. ``support`` lists the
    cuts carrying a positive multiplier of the quadratically perturbed
    problem; those cuts alone reproduce ``z_star``.
    """

    status: Status
    z_star: np.ndarray | None
    gamma: float
    active_set: np.ndarray
    lp_dual: np.ndarray | None = None
    qp_dual: np.ndarray | None = None
    support: np.ndarray | None = None
    ray: np.ndarray | None = None
    stats: SolverStats | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True, eq=False)
class Basis:
    """At most ``d`` cuts with the same min-norm optimizer as their source."""

    cuts: CutCollection
    degenerate: bool = False

    def __len__(self):
        return len(self.cuts)


@dataclass(frozen=True)
class PerturbedObjective:
    """``J(z) = c.z - (epsilon/2) |z|^2``."""

    c: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def __call__(self, z) -> float:
        return eval_perturbed(self, z)


def eval_perturbed(obj: PerturbedObjective, z) -> float:
    z = np.asarray(z, dtype=float)
    c = np.asarray(obj.c, dtype=float)
    return float(c @ z - 0.5 * obj.epsilon * (z @ z))


def _lp(A, b, c, warm, tol: Tolerances):
    m, d = A.shape
    max_iter = 100 * (m + d) + 100
    return kernels.dual_simplex(A, b, c, warm, max_iter, 1e-11, 1e-9, 1e-9)


def solve_min_norm(H: CutCollection, c, warm=None, tol: Tolerances = DEFAULT_TOL) -> ApproxLpSolution:
    """Minimal-2-norm maximizer of ``c.z`` over the polyhedron of ``H``.

    ``warm`` is an optional sequence of cut indices used as the starting
    simplex basis (typically the node's current basis).
    """
    c = np.asarray(c, dtype=np.float64).ravel()
    if len(H) == 0:
        raise ValueError("cut collection must be non-empty")
    if c.size != H.dim:
        raise ValueError(f"objective has dimension {c.size}, cuts have {H.dim}")
    A, b = H.A, H.b
    m, d = A.shape
    warm_idx = np.asarray([] if warm is None else warm, dtype=np.int64)
    status, z, y, bas, n_lp, ray = _lp(A, b, c, warm_idx, tol)
    empty = np.zeros(0, dtype=np.int64)
    if status == kernels.UNBOUNDED:
        # no dual solution: either the polyhedron is empty or c.z is unbounded
        fstatus = _lp(A, b, np.zeros(d), empty, tol)[0]
        st = Status.INFEASIBLE if fstatus == kernels.INFEASIBLE else Status.UNBOUNDED
        return ApproxLpSolution(st, None, np.inf if st is Status.UNBOUNDED else -np.inf, empty,
                                ray=ray if st is Status.UNBOUNDED else None,
                                stats=SolverStats(n_lp, warm_started=warm_idx.size > 0))
    if status == kernels.INFEASIBLE:
        return ApproxLpSolution(Status.INFEASIBLE, None, -np.inf, empty,
                                stats=SolverStats(n_lp, warm_started=warm_idx.size > 0))
    if status != kernels.OPTIMAL:
        raise SolverError("simplex iteration limit reached", iterations=n_lp)

    ytol = 1e-9 * (1.0 + np.abs(c).max())
    basic = bas[bas < m]
    unique = basic.size == d and bool(np.all(y[basic] > ytol))
    qp_dual = np.zeros(m)
    n_qp = 0
    if unique:
        support = np.sort(basic)
    else:
        on_face = y > ytol
        Q = np.eye(d)
        q = np.zeros(d)
        qst, x, lam, working, n_qp = kernels.active_set_qp(
            Q, q, A, b, on_face, z, 100 * (m + d) + 100, 1e-11)
        if qst != kernels.OPTIMAL:
            raise SolverError("projection onto the optimal face failed",
                              status=int(qst), iterations=int(n_qp))
        z = x
        qp_dual = lam
        lam_tol = 1e-9 * (1.0 + np.linalg.norm(z))
        support = np.flatnonzero(on_face | (working & (lam > lam_tol)))
    slack = A @ z - b
    max_viol = float(slack.max())
    scale = 1.0 + np.abs(b).max()
    if max_viol > max(tol.feas, 1e-12 * scale) * 100:
        raise SolverError("min-norm solution violates its cuts",
                          max_violation=max_viol, iterations=n_lp)
    gamma = float(c @ z)
    active = np.flatnonzero(np.abs(slack) <= tol.act)
    return ApproxLpSolution(
        Status.OPTIMAL, z, gamma, active, lp_dual=y, qp_dual=qp_dual, support=support,
        stats=SolverStats(n_lp, n_qp, not unique, warm_idx.size > 0, max_viol))


def _independent(A_rows: np.ndarray) -> bool:
    if A_rows.shape[0] == 0:
        return True
    if A_rows.shape[0] > A_rows.shape[1]:
        return False
    s = np.linalg.svd(A_rows, compute_uv=False)
    return bool(s[-1] > 1e-9 * max(1.0, s[0]))


def extract_basis(H: CutCollection, c, sol: ApproxLpSolution,
                  tol: Tolerances = DEFAULT_TOL) -> Basis:
    """Select at most ``d`` cuts of ``H`` reproducing ``sol.z_star``.

    Cuts with a zero multiplier are dropped first: the KKT system of the
    remaining cuts still certifies ``z_star``. If the survivors are linearly
    independent their multipliers are unique and positive, so the set is
    minimal. Otherwise the survivors are pruned one at a time in order of
    increasing multiplier, re-solving after each removal.
    """
    if not sol.optimal:
        raise ValueError("basis extraction needs an optimal solution")
    c = np.asarray(c, dtype=np.float64).ravel()
    d = H.dim
    cand = np.asarray(sol.support, dtype=np.int64)
    # an LP basis with positive multipliers is a nonsingular vertex already
    if not sol.stats.projected and cand.size <= d:
        return Basis(H.subset(cand))
    if cand.size <= d and _independent(H.A[cand]):
        return Basis(H.subset(cand))

    # degenerate vertex: prune by re-solving
    y = sol.lp_dual[cand]
    lam = sol.qp_dual[cand]
    order = np.lexsort((np.abs(lam), np.abs(y)))
    current = list(cand)
    z_ref = sol.z_star
    ztol = tol.opt * (1.0 + np.linalg.norm(z_ref))
    for k in cand[order]:
        if len(current) <= 1:
            break
        trial = [i for i in current if i != k]
        sub = H.subset(trial)
        s2 = solve_min_norm(sub, c, tol=tol)
        if s2.optimal and np.linalg.norm(s2.z_star - z_ref) <= ztol:
            current = trial
    current = np.sort(np.asarray(current, dtype=np.int64))
    return Basis(H.subset(current), degenerate=current.size > d)
