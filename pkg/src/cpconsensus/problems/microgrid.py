"""Microgrid dispatch as an almost-separable problem.

Units are generators, storage devices, controllable loads and a grid
connection. Each unit chooses its power schedule over ``T`` periods; the
coupling constraint asks the summed net injections to meet the demand ``D``.
Generation counts positive and consumption negative.

Parameter ranges below are illustrative defaults, not calibrated data.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..geometry import DEFAULT_TOL
from ..oracles import ColGenConstraint, OracleError
from .base import InstanceError, ProblemInstance


@dataclass(frozen=True, eq=False)
class Unit:
    """A local QP block: ``min 0.5 x'Qx + q.x`` over ``{A x <= b}``.

    ``G`` maps ``x`` to the per-period net injection; ``x0`` is a feasible
    point used to start the active-set solver.
    """

    kind: str
    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    G: np.ndarray
    x0: np.ndarray
    params: dict = field(default_factory=dict)

    def cost(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.q @ x)

    def contains(self, x, tol: float = 1e-7) -> bool:
        return bool(np.all(self.A @ np.asarray(x, dtype=float) - self.b <= tol))


def _box_rows(m, lo, hi, sel=None):
    """Rows ``x_sel <= hi`` and ``-x_sel <= -lo`` for a block of an ``m``-vector."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    k = lo.size
    sel = np.arange(k) if sel is None else np.asarray(sel)
    E = np.zeros((k, m))
    E[np.arange(k), sel] = 1.0
    return np.vstack([E, -E]), np.concatenate([hi, -lo])


def generator(T, pmin, pmax, rmin, rmax, alpha, beta) -> Unit:
    """Power ``p`` in ``[pmin, pmax]``, ramps in ``[rmin, rmax]``, cost ``alpha p + beta p^2``."""
    A1, b1 = _box_rows(T, np.full(T, pmin), np.full(T, pmax))
    D = np.diff(np.eye(T), axis=0)  # rows p(t+1) - p(t)
    A = np.vstack([A1, D, -D])
    b = np.concatenate([b1, np.full(T - 1, rmax), np.full(T - 1, -rmin)])
    x0 = np.full(T, 0.5 * (pmin + pmax))
    return Unit("generator", 2.0 * beta * np.eye(T), np.full(T, float(alpha)), A, b, np.eye(T), x0,
                dict(pmin=pmin, pmax=pmax, rmin=rmin, rmax=rmax, alpha=alpha, beta=beta))


def storage(T, c_st, d_st, q_max, q_init) -> Unit:
    """``-d_st <= p <= c_st`` and ``0 <= q_init + cumsum(p) <= q_max``; no cost."""
    if not 0 <= q_init <= q_max:
        raise InstanceError("initial charge outside [0, q_max]")
    A1, b1 = _box_rows(T, np.full(T, -d_st), np.full(T, c_st))
    L = np.tril(np.ones((T, T)))
    A = np.vstack([A1, L, -L])
    b = np.concatenate([b1, np.full(T, q_max - q_init), np.full(T, q_init)])
    return Unit("storage", np.zeros((T, T)), np.zeros(T), A, b, np.eye(T), np.zeros(T),
                dict(c_st=c_st, d_st=d_st, q_max=q_max, q_init=q_init))


def controllable_load(T, profile, alpha, p_max=None) -> Unit:
    """Consumes ``p`` in ``[0, p_max]`` at cost ``alpha (profile - p)_+``.

    ``x = (p, s)`` with the epigraph variable ``s >= profile - p``, ``s >= 0``.
    """
    l = np.asarray(profile, dtype=float)
    p_max = np.asarray(1.25 * l if p_max is None else p_max, dtype=float)
    m = 2 * T
    I, Z = np.eye(T), np.zeros((T, T))
    A1, b1 = _box_rows(m, np.zeros(T), p_max, np.arange(T))
    A2, b2 = _box_rows(m, np.zeros(T), l, T + np.arange(T))
    A = np.vstack([A1, A2, np.hstack([-I, -I])])
    b = np.concatenate([b1, b2, -l])
    q = np.concatenate([np.zeros(T), np.full(T, float(alpha))])
    G = np.hstack([-I, Z])
    x0 = np.concatenate([l, np.zeros(T)])
    return Unit("load", np.zeros((m, m)), q, A, b, G, x0,
                dict(profile=l.tolist(), alpha=alpha, p_max=p_max.tolist()))


def grid_trade(T, E, price, fee) -> Unit:
    """Imports ``p`` in ``[-E, E]`` at cost ``price . p + fee |p|``.

    ``x = (p, s)`` with ``s >= |p|``, ``s <= E``.
    """
    price = np.asarray(price, dtype=float)
    m = 2 * T
    I, Z = np.eye(T), np.zeros((T, T))
    A1, b1 = _box_rows(m, np.full(T, -E), np.full(T, E), np.arange(T))
    A2, b2 = _box_rows(m, np.zeros(T), np.full(T, E), T + np.arange(T))
    A = np.vstack([A1, A2, np.hstack([I, -I]), np.hstack([-I, -I])])
    b = np.concatenate([b1, b2, np.zeros(2 * T)])
    q = np.concatenate([price, np.full(T, float(fee))])
    return Unit("trade", np.zeros((m, m)), q, A, b, np.hstack([I, Z]), np.zeros(m),
                dict(E=E, price=price.tolist(), fee=fee))


class UnitResponse:
    """Exact best response of one unit; warm-started from the previous answer."""

    def __init__(self, unit: Unit, tol: float = DEFAULT_TOL.sub):
        self.unit = unit
        self.tol = tol
        self._x = unit.x0.copy()
        self._eq = np.zeros(unit.b.size, dtype=np.bool_)

    def __call__(self, w):
        u = self.unit
        m = u.q.size
        st, x, lam, working, it = kernels.active_set_qp(
            u.Q, u.q + np.asarray(w, dtype=float), u.A, u.b, self._eq, self._x,
            100 * (u.b.size + m) + 100, 1e-12)
        if st != kernels.OPTIMAL:
            # restart from the certified interior point before giving up
            st, x, lam, working, it = kernels.active_set_qp(
                u.Q, u.q + np.asarray(w, dtype=float), u.A, u.b, self._eq, u.x0,
                100 * (u.b.size + m) + 100, 1e-12)
            if st != kernels.OPTIMAL:
                raise OracleError(f"{u.kind} subproblem failed with status {st}")
        self._x = x
        return x


@dataclass(eq=False)
class MicrogridInstance(ProblemInstance):
    """Dual form: ``z = (pi, u)``, ``max -D.pi + sum u_i``."""

    units: list
    demand: np.ndarray
    M: float = 1e5
    seed: int | None = None
    kind = "microgrid"

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float).ravel()
        if not self.units:
            raise InstanceError("microgrid needs at least one unit")
        for u in self.units:
            if u.G.shape[0] != self.T:
                raise InstanceError("unit injection map does not match the horizon")

    @property
    def T(self) -> int:
        return self.demand.size

    @property
    def r(self) -> int:
        return self.T

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def d(self) -> int:
        return self.T + self.n

    @property
    def c(self) -> np.ndarray:
        return np.concatenate([-self.demand, np.ones(self.n)])

    @property
    def h(self) -> np.ndarray:
        return self.demand

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem):
        return [ColGenConstraint(UnitResponse(u), u.cost, u.G, i, self.n, tol_mem, u.contains)
                for i, u in enumerate(self.units)]

    def dual_function(self, pi) -> float:
        pi = np.asarray(pi, dtype=float)
        return float(-self.demand @ pi + sum(o.best_response(pi)[1] for o in self.oracles()))

    def certificate(self) -> list:
        """A feasible dispatch: generators share the demand pro rata, others idle."""
        gens = [u for u in self.units if u.kind == "generator"]
        cap = sum(u.params["pmax"] for u in gens)
        xs = []
        for u in self.units:
            if u.kind == "generator":
                xs.append(self.demand * u.params["pmax"] / cap)
            elif u.kind == "storage":
                xs.append(np.zeros(self.T))
            elif u.kind == "load":
                xs.append(np.concatenate([np.zeros(self.T), np.asarray(u.params["profile"])]))
            else:
                xs.append(np.zeros(2 * self.T))
        return xs

    def check_certificate(self, tol: float = 1e-9) -> bool:
        xs = self.certificate()
        ok = all(u.contains(x, tol) for u, x in zip(self.units, xs))
        inj = sum(u.G @ x for u, x in zip(self.units, xs))
        return ok and bool(np.allclose(inj, self.demand, atol=1e-9))

    def feasible_point(self):
        pi = np.zeros(self.T)
        u = np.array([o.best_response(pi)[1] for o in self.oracles()])
        return np.concatenate([pi, u])

    def sample_feasible(self, rng, k):
        ors = self.oracles()
        out = np.empty((k, self.d))
        for j in range(k):
            pi = rng.normal(scale=5.0, size=self.T) - 2.0
            u = np.array([o.best_response(pi)[1] for o in ors])
            u -= rng.exponential(size=self.n) * (rng.uniform() < 0.5)
            out[j] = np.concatenate([pi, u])
        return out

    def to_dict(self):
        return {"kind": self.kind, "demand": self.demand.tolist(), "M": self.M, "seed": self.seed,
                "units": [{"kind": u.kind, **u.params} for u in self.units]}

    @classmethod
    def from_dict(cls, data):
        T = len(data["demand"])
        units = []
        for p in data["units"]:
            p = dict(p)
            kind = p.pop("kind")
            if kind == "generator":
                units.append(generator(T, **p))
            elif kind == "storage":
                units.append(storage(T, **p))
            elif kind == "load":
                units.append(controllable_load(T, **p))
            elif kind == "trade":
                units.append(grid_trade(T, **p))
            else:
                raise InstanceError(f"unknown unit kind {kind!r}")
        inst = cls(units, data["demand"], float(data.get("M", 1e5)), data.get("seed"))
        if not inst.check_certificate():
            raise InstanceError("demand cannot be met by the pro-rata dispatch")
        return inst


def gen_microgrid(seed: int, T: int = 12, n_gen: int = 60, n_storage: int = 20, n_load: int = 20,
                  D0: float = 400.0, amplitude: float = 100.0, sigma: float = 20.0,
                  M: float = 1e5) -> MicrogridInstance:
    """Random microgrid with demand ``D(t) = D0 + A sin(2 pi t / T) + sigma eta_t``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 17])))
    units = []
    for _ in range(n_gen):
        pmax = float(rng.uniform(5.0, 20.0))
        ramp = 0.4 * pmax
        units.append(generator(T, 0.0, pmax, -ramp, ramp, float(rng.uniform(0.5, 2.0)),
                               float(rng.uniform(0.01, 0.05))))
    for _ in range(n_storage):
        qmax = float(rng.uniform(10.0, 30.0))
        units.append(storage(T, float(rng.uniform(2.0, 6.0)), float(rng.uniform(2.0, 6.0)),
                             qmax, 0.5 * qmax))
    tt = np.arange(1, T + 1)
    for _ in range(n_load):
        l0 = float(rng.uniform(2.0, 8.0))
        profile = l0 * (1.0 + 0.1 * np.sin(2 * np.pi * tt / T + rng.uniform(0, 2 * np.pi)))
        units.append(controllable_load(T, profile, float(rng.uniform(2.0, 5.0))))
    price = 1.5 + 0.5 * np.sin(2 * np.pi * tt / T)
    units.append(grid_trade(T, 50.0, price, 0.1))
    demand = D0 + amplitude * np.sin(2 * np.pi * tt / T) + sigma * rng.normal(size=T)
    inst = MicrogridInstance(units, demand, M, seed)
    if not inst.check_certificate():
        raise InstanceError("generated demand is not met by the pro-rata dispatch")
    return inst
