"""One processor of the cutting-plane consensus protocol."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import DEFAULT_TOL, CutCollection, CutOrigin, Tolerances, box_basis
from .minnorm import Basis, SolverError, extract_basis, solve_min_norm
from .oracles import Column, Oracle, OracleError, OracleReply


@dataclass(frozen=True, eq=False)
class BasisMessage:
    """A node's basis as sent to its out-neighbours."""

    sender: int
    round: int
    cuts: CutCollection

    @property
    def payload_size(self) -> int:
        """Number of doubles on the wire, header excluded."""
        return len(self.cuts) * (self.cuts.dim + 1)


@dataclass(frozen=True)
class NodeTrace:
    round: int
    node: int
    gamma: float
    z_norm: float
    basis_size: int
    verdict: str
    slack: float


@dataclass(frozen=True, eq=False)
class NodeState:
    id: int
    basis: Basis
    query: np.ndarray | None
    gamma: float
    oracle: Oracle
    history: tuple = ()  # (serial, Column) pairs of cuts this node generated
    round_count: int = 0
    serial: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def message(self, round_: int) -> BasisMessage:
        return BasisMessage(self.id, round_, self.basis.cuts)


def init_node(id: int, d: int, M: float, oracle: Oracle, c,
              tol: Tolerances = DEFAULT_TOL) -> NodeState:
    """Node whose basis is extracted from the box ``[-M, M]^d``."""
    box = box_basis(d, M)
    sol = solve_min_norm(box, c, tol=tol)
    basis = extract_basis(box, c, sol, tol)
    return NodeState(id, basis, sol.z_star, sol.gamma, oracle)


def step(node: NodeState, incoming: Sequence[BasisMessage], c,
         tol: Tolerances = DEFAULT_TOL, history_cap: int | None = None
         ) -> tuple[NodeState, BasisMessage | None, NodeTrace]:
    """Execute one round: merge, solve, query the oracle, update the basis.

    Returns the new state, the outgoing message (``None`` for a node in the
    error state) and the trace record of the round.
    """
    t = node.round_count + 1
    if node.failed:
        return node, None, NodeTrace(t, node.id, node.gamma, np.nan, len(node.basis), "error", np.nan)
    own = node.basis.cuts
    H = own.union(*(m.cuts for m in incoming)) if incoming else own
    warm = np.arange(len(own))
    try:
        sol = solve_min_norm(H, c, warm=warm, tol=tol)
        if not sol.optimal:
            raise SolverError(f"approximate program is {sol.status.value}")
        z = sol.z_star
        b_tmp = extract_basis(H, c, sol, tol)
        reply: OracleReply = node.oracle(z)
        if reply.inside:
            basis = b_tmp
        else:
            origin = CutOrigin(node.id, t, node.serial)
            H2 = b_tmp.cuts.add(reply.cut, origin)
            sol2 = solve_min_norm(H2, c, warm=np.arange(len(b_tmp)), tol=tol)
            if not sol2.optimal:
                raise SolverError(f"approximate program is {sol2.status.value}")
            basis = extract_basis(H2, c, sol2, tol)
    except (SolverError, OracleError) as exc:
        bad = replace(node, error=str(exc), round_count=t)
        return bad, None, NodeTrace(t, node.id, node.gamma, np.nan, len(node.basis), "error", np.nan)

    history = node.history
    col = reply.witness
    if isinstance(col, Column) and not (history and np.array_equal(history[-1][1].x, col.x)):
        tag = -1 if reply.inside else node.serial
        history = _trim(history + ((tag, col),), basis, node.id, history_cap)
    new = replace(node, basis=basis, query=z, gamma=sol.gamma, history=history,
                  round_count=t, serial=node.serial + (0 if reply.inside else 1))
    trace = NodeTrace(t, node.id, sol.gamma, float(np.linalg.norm(z)), len(basis),
                      reply.verdict, float(reply.s))
    return new, new.message(t), trace


def _trim(history: tuple, basis: Basis, me: int, cap: int | None) -> tuple:
    """Keep the ``cap`` newest columns plus those behind cuts of the own basis."""
    if cap is None or len(history) <= cap:
        return history
    pinned = {o.serial for o in basis.cuts.origins if o.node == me}
    old, new = history[:-cap], history[-cap:]
    return tuple(h for h in old if h[0] in pinned) + new


def has_converged(node: NodeState, z_ref, eps: float) -> bool:
    if node.query is None:
        return False
    return bool(np.linalg.norm(node.query - np.asarray(z_ref, dtype=float)) <= eps)
