"""Cutting-plane oracles.

Every oracle maps a query point ``z`` to an :class:`OracleReply`: either the
point is accepted, or a half-space containing the constraint set but not
``z`` is returned together with the violation ``s > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .geometry import DEFAULT_TOL, HalfSpace

INSIDE = "inside"
CUT = "cut"


class OracleError(RuntimeError):
    """The oracle could not produce a valid reply at the query point."""


@dataclass(frozen=True)
class Column:
    """A generated column ``(x, G x, f(x))`` of a column-generation oracle."""

    x: np.ndarray
    Gx: np.ndarray
    cost: float
    owner: int = 0


@dataclass(frozen=True, eq=False)
class OracleReply:
    """Membership verdict; ``cut`` and ``s`` are set only for cuts."""

    verdict: str
    cut: HalfSpace | None = None
    s: float = 0.0
    witness: Any = None

    @property
    def inside(self) -> bool:
        return self.verdict == INSIDE

    @classmethod
    def accept(cls, witness=None, s: float = 0.0) -> "OracleReply":
        return cls(INSIDE, None, s, witness)


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise OracleError("constraint evaluation returned non-finite values")


def _cut_from_subgradient(value: float, g, z, witness=None) -> OracleReply:
    g = np.asarray(g, dtype=float).ravel()
    _check_finite(value, g)
    if not np.linalg.norm(g) > 0.0:
        # f(z) > 0 with a zero subgradient means f > 0 everywhere
        raise OracleError("zero subgradient at a violating point: constraint set is empty")
    return OracleReply(CUT, HalfSpace(g, float(g @ z - value)), float(value), witness)


class Oracle:
    """Base class. Subclasses implement :meth:`query`."""

    tol_mem: float = DEFAULT_TOL.mem

    def __call__(self, z) -> OracleReply:
        return self.query(np.asarray(z, dtype=float).ravel())

    def query(self, z: np.ndarray) -> OracleReply:  # pragma: no cover
        raise NotImplementedError

    def value(self, z) -> float:
        """Constraint function value; ``<= 0`` exactly on the feasible set."""
        raise NotImplementedError  # pragma: no cover


# -- inequality constraints ------------------------------------------------

class InequalityConstraint(Oracle):
    """``{z : f(z) <= 0}`` for a convex ``f``.

    ``f`` returns ``(value, subgradient)``.
    """

    def __init__(self, f: Callable[[np.ndarray], tuple[float, np.ndarray]],
                 tol_mem: float = DEFAULT_TOL.mem):
        self.f = f
        self.tol_mem = tol_mem

    def value(self, z) -> float:
        return float(self.f(np.asarray(z, dtype=float))[0])

    def query(self, z):
        return subgradient_cut(self, z)


class MaxOfConstraints(InequalityConstraint):
    """``max_k f_k(z) <= 0`` built from a list of ``(value, subgradient)`` handles."""

    def __init__(self, branches: Sequence[Callable], tol_mem: float = DEFAULT_TOL.mem):
        if not branches:
            raise ValueError("at least one branch is required")
        self.branches = list(branches)
        super().__init__(self._eval, tol_mem)

    def _eval(self, z):
        best_v, best_g = -np.inf, None
        for br in self.branches:
            v, g = br(z)
            v = float(v)
            if not np.isfinite(v):
                raise OracleError("branch returned a non-finite value")
            if v > best_v:  # strict: lowest index wins ties
                best_v, best_g = v, g
        return best_v, best_g


class AffineMax(InequalityConstraint):
    """``max_k (A_k . z - b_k) <= 0``; a polyhedron given by its rows."""

    def __init__(self, A, b, tol_mem: float = DEFAULT_TOL.mem):
        self.A = np.array(A, dtype=float, ndmin=2)
        self.b = np.array(b, dtype=float).ravel()
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b disagree")
        super().__init__(self._eval, tol_mem)

    def _eval(self, z):
        vals = self.A @ z - self.b
        k = int(np.argmax(vals))
        return float(vals[k]), self.A[k]


class QuadraticConstraint(InequalityConstraint):
    """``(z - center)^T Q (z - center) - r^2 <= 0`` with ``Q`` positive definite."""

    def __init__(self, Q, center, r, tol_mem: float = DEFAULT_TOL.mem):
        self.Q = np.array(Q, dtype=float, ndmin=2)
        self.center = np.array(center, dtype=float).ravel()
        self.r = float(r)
        super().__init__(self._eval, tol_mem)

    def _eval(self, z):
        e = z - self.center
        Qe = self.Q @ e
        return float(e @ Qe - self.r ** 2), 2.0 * Qe


def subgradient_cut(con: InequalityConstraint, z) -> OracleReply:
    """Accept ``z`` if ``f(z) <= tol_mem``, else cut with ``g.(y - z) + f(z) <= 0``."""
    z = np.asarray(z, dtype=float).ravel()
    value, g = con.f(z)
    value = float(value)
    _check_finite(value)
    if value <= con.tol_mem:
        return OracleReply.accept(s=value)
    return _cut_from_subgradient(value, g, z)


# -- semidefinite constraints ----------------------------------------------

class SemidefiniteConstraint(Oracle):
    """``F(z) = F_0 + sum_k z_k F_k`` negative semidefinite."""

    def __init__(self, F: Sequence, tol_mem: float = DEFAULT_TOL.mem):
        mats = [np.array(M, dtype=float, ndmin=2) for M in F]
        if len(mats) < 2:
            raise ValueError("need F_0 and at least one F_k")
        k = mats[0].shape[0]
        for M in mats:
            if M.shape != (k, k):
                raise ValueError("matrices must be square and of equal size")
            if np.abs(M - M.T).max() > 1e-12:
                raise ValueError("matrices must be symmetric")
        self.F0 = mats[0]
        self.Fk = np.stack(mats[1:])
        self.tol_mem = tol_mem

    @property
    def dim(self) -> int:
        return self.Fk.shape[0]

    def matrix(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.dim:
            raise ValueError(f"point has dimension {z.size}, constraint has {self.dim}")
        return self.F0 + np.tensordot(z, self.Fk, axes=1)

    def value(self, z) -> float:
        return float(np.linalg.eigvalsh(self.matrix(z))[-1])

    def query(self, z):
        return sdp_cut(self, z)


def sdp_cut(con: SemidefiniteConstraint, z) -> OracleReply:
    """Cut from the leading eigenpair: ``g_k = v^T F_k v``."""
    z = np.asarray(z, dtype=float).ravel()
    Fz = con.matrix(z)
    _check_finite(Fz)
    try:
        w, V = np.linalg.eigh(Fz)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise OracleError(f"eigensolver failed: {exc}") from exc
    lam = float(w[-1])
    if lam <= con.tol_mem:
        return OracleReply.accept(s=lam)
    v = V[:, -1]
    g = np.einsum("i,kij,j->k", v, con.Fk, v)
    return _cut_from_subgradient(lam, g, z)


def disk_constraint(center, r, tol_mem: float = DEFAULT_TOL.mem) -> SemidefiniteConstraint:
    """``|z - center| <= r`` in Schur-complement form.

    ``F(z) = -[[r I, z - v], [(z - v)^T, r]]`` whose largest eigenvalue is
    ``|z - v| - r``.
    """
    v = np.asarray(center, dtype=float).ravel()
    d = v.size
    r = float(r)
    if not r > 0:
        raise ValueError("radius must be positive")
    F0 = np.zeros((d + 1, d + 1))
    F0[:d, :d] = -r * np.eye(d)
    F0[d, d] = -r
    F0[:d, d] = v
    F0[d, :d] = v
    mats = [F0]
    for k in range(d):
        E = np.zeros((d + 1, d + 1))
        E[k, d] = E[d, k] = -1.0
        mats.append(E)
    return SemidefiniteConstraint(mats, tol_mem)


# -- uncertain constraints ---------------------------------------------------

@dataclass(frozen=True)
class Ellipsoid:
    """``{center + P u : |u|_2 <= 1}``."""

    center: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float).ravel()
        P = np.array(self.P, dtype=float, ndmin=2)
        if P.shape != (c.size, c.size):
            raise ValueError("P must be square and match the center")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "P", P)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        d = self.center.size
        u = rng.normal(size=(k, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        u *= rng.uniform(size=(k, 1)) ** (1.0 / d)
        return self.center + u @ self.P.T


@dataclass(frozen=True)
class Polytope:
    """Convex hull of ``vertices`` (one per row)."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if V.shape[0] == 0:
            raise ValueError("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", V)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        w = rng.dirichlet(np.ones(self.vertices.shape[0]), size=k)
        return w @ self.vertices


class UncertainConstraint(Oracle):
    """``{z : f(z, theta) <= 0 for all theta in the uncertainty set}``.

    Parameters
    ----------
    f : callable
        ``f(z, theta) -> (value, subgradient in z)``; convex in ``z``.
    uncertainty : Ellipsoid, Polytope or callable
        A callable is used as a custom maximizer ``z -> theta*``.
    coeff : callable, optional
        For ellipsoids ``f`` must be affine in ``theta``,
        ``f = coeff(z) . theta + const(z)``; ``coeff`` returns that slope.
    """

    def __init__(self, f, uncertainty, coeff=None, tol_mem: float = DEFAULT_TOL.mem):
        if isinstance(uncertainty, Ellipsoid) and coeff is None:
            raise ValueError("ellipsoidal uncertainty needs the theta-slope handle")
        self.f = f
        self.uncertainty = uncertainty
        self.coeff = coeff
        self.tol_mem = tol_mem

    def value(self, z) -> float:
        return pessimize(self, np.asarray(z, dtype=float))[1]

    def query(self, z):
        return robust_cut(self, z)


def pessimize(con: UncertainConstraint, z) -> tuple[np.ndarray, float]:
    """Worst-case parameter ``theta*`` at ``z`` and ``f(z, theta*)``."""
    z = np.asarray(z, dtype=float).ravel()
    U = con.uncertainty
    if isinstance(U, Ellipsoid):
        alpha = np.asarray(con.coeff(z), dtype=float).ravel()
        Pa = U.P.T @ alpha
        nrm = np.linalg.norm(Pa)
        theta = U.center + (U.P @ Pa) / nrm if nrm > 0 else U.center.copy()
    elif isinstance(U, Polytope):
        vals = [float(con.f(z, v)[0]) for v in U.vertices]
        theta = U.vertices[int(np.argmax(vals))].copy()
    elif callable(U):
        theta = np.asarray(U(z), dtype=float)
    else:
        raise TypeError("unsupported uncertainty set")
    worst = float(con.f(z, theta)[0])
    _check_finite(worst)
    return theta, worst


def robust_cut(con: UncertainConstraint, z) -> OracleReply:
    z = np.asarray(z, dtype=float).ravel()
    theta, worst = pessimize(con, z)
    if worst <= con.tol_mem:
        return OracleReply.accept(theta, s=worst)
    g = con.f(z, theta)[1]
    return _cut_from_subgradient(worst, g, z, theta)


def robust_linear_row(abar, P, b, tol_mem: float = DEFAULT_TOL.mem) -> UncertainConstraint:
    """``a . z <= b`` for every ``a`` in the ellipsoid ``{abar + P u : |u| <= 1}``."""
    b = float(b)
    f = lambda z, a: (float(a @ z - b), np.asarray(a, dtype=float))
    return UncertainConstraint(f, Ellipsoid(abar, P), coeff=lambda z: z, tol_mem=tol_mem)


# -- column generation -------------------------------------------------------

class ColGenConstraint(Oracle):
    """Dual constraint of one block of an almost-separable problem.

    The decision vector is ``z = (pi, u)`` with ``pi`` of length ``r`` and
    ``u`` of length ``n``. The set is
    ``{u_i <= f_i(x) + pi . G_i x  for all x in X_i}``.

    Parameters
    ----------
    subproblem : callable
        ``subproblem(w) -> x`` minimizing ``f_i(x) + w . x`` over ``X_i``,
        where ``w = G_i^T pi``. Must be exact to ``tol_sub``.
    cost : callable
        ``f_i``.
    G : array, shape (r, m_i)
    owner : int
        Index ``i`` of the ``u`` component handled by this oracle.
    n : int
        Number of blocks.
    """

    def __init__(self, subproblem, cost, G, owner: int, n: int,
                 tol_mem: float = DEFAULT_TOL.mem, contains=None):
        self.subproblem = subproblem
        self.cost = cost
        self.G = np.array(G, dtype=float, ndmin=2)
        self.owner = int(owner)
        self.n = int(n)
        if not 0 <= self.owner < self.n:
            raise ValueError("owner index out of range")
        self.tol_mem = tol_mem
        self.contains = contains

    @property
    def r(self) -> int:
        return self.G.shape[0]

    @property
    def dim(self) -> int:
        return self.r + self.n

    def best_response(self, pi) -> tuple[np.ndarray, float]:
        """``(x_bar, gamma*)`` with ``gamma* = min_x f(x) + pi . G x``."""
        pi = np.asarray(pi, dtype=float).ravel()
        w = self.G.T @ pi
        x = self.subproblem(w)
        if x is None:
            raise OracleError("local subproblem is infeasible")
        x = np.asarray(x, dtype=float).ravel()
        gam = float(self.cost(x) + w @ x)
        _check_finite(x, gam)
        return x, gam

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float).ravel()
        return float(z[self.r + self.owner] - self.best_response(z[:self.r])[1])

    def query(self, z):
        return colgen_cut(self, z)


def colgen_cut(con: ColGenConstraint, z) -> OracleReply:
    """Cut ``u_i - (G_i x_bar) . pi <= f_i(x_bar)`` at the best response ``x_bar``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != con.dim:
        raise ValueError(f"query has dimension {z.size}, expected {con.dim}")
    r = con.r
    x, gam = con.best_response(z[:r])
    Gx = con.G @ x
    fx = float(con.cost(x))
    col = Column(x, Gx, fx, con.owner)
    s = float(z[r + con.owner] - gam)
    if s <= con.tol_mem:
        return OracleReply.accept(col, s=s)
    a = np.zeros(con.dim)
    a[:r] = -Gx
    a[r + con.owner] = 1.0
    return OracleReply(CUT, HalfSpace(a, fx), s, col)


# -- composition -------------------------------------------------------------

class CompositeOracle(Oracle):
    """Intersection of several sets.

    Replies with the cut farthest from the query point in Euclidean distance.
    """

    def __init__(self, parts: Sequence[Oracle]):
        if not parts:
            raise ValueError("need at least one oracle")
        self.parts = list(parts)

    def value(self, z) -> float:
        return max(p.value(z) for p in self.parts)

    def query(self, z):
        best, best_dist = None, 0.0
        for p in self.parts:
            rep = p(z)
            if rep.inside:
                continue
            dist = rep.s / np.linalg.norm(rep.cut.a)
            if best is None or dist > best_dist:
                best, best_dist = rep, dist
        if best is None:
            return OracleReply.accept()
        return best

    def query_all(self, z) -> list[OracleReply]:
        """Every violated part's cut, in part order."""
        return [rep for rep in (p(z) for p in self.parts) if not rep.inside]
