"""Round-based simulation of the protocol over time-varying digraphs.

Messages sent in round ``t`` travel along the edges ``E(t)`` and are read in
round ``t + 1``. Every random draw comes from ``numpy.random.PCG64`` seeded by
``SeedSequence([seed, round])`` (graph draws use ``[seed, round, 1]``), so a
run is a pure function of its inputs.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import DEFAULT_TOL, Tolerances
from .node import BasisMessage, NodeState, NodeTrace, init_node, step


class GraphError(ValueError):
    pass


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


class CommGraph:
    """Directed communication graph ``G(t)`` on nodes ``0..n-1``.

    Build instances through :meth:`static`, :meth:`circulant`,
    :meth:`erdos_renyi` or :meth:`script`.
    """

    def __init__(self, n: int, kind: str, edge_fn: Callable[[int], np.ndarray], params: dict):
        if n < 1:
            raise GraphError("graph needs at least one node")
        self.n = int(n)
        self.kind = kind
        self._edge_fn = edge_fn
        self.params = params
        self._cache: dict[int, np.ndarray] = {}

    def __repr__(self):
        return f"CommGraph(kind={self.kind!r}, n={self.n})"

    @property
    def is_static(self) -> bool:
        return self.kind in ("static", "circulant", "regular") or (
            self.kind == "erdos_renyi" and not self.params["resample"])

    def edges(self, t: int) -> np.ndarray:
        """``(E, 2)`` int array of ``(sender, receiver)`` pairs at round ``t``."""
        key = 0 if self.is_static else int(t)
        e = self._cache.get(key)
        if e is None:
            e = self._edge_fn(key)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = e
        return e

    def in_neighbors(self, t: int) -> list[np.ndarray]:
        e = self.edges(t)
        order = np.lexsort((e[:, 0], e[:, 1]))
        e = e[order]
        split = np.searchsorted(e[:, 1], np.arange(1, self.n))
        return np.split(e[:, 0], split)

    # -- constructors -------------------------------------------------

    @staticmethod
    def _clean(n, edges) -> np.ndarray:
        e = np.array(sorted({(int(a), int(b)) for a, b in edges}), dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise GraphError("self-loops are not allowed")
        return e

    @classmethod
    def static(cls, n: int, edges) -> "CommGraph":
        e = cls._clean(n, edges)
        return cls(n, "static", lambda t: e, {"edges": e.tolist()})

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls.static(n, [(i, j) for i in range(n) for j in range(n) if i != j])

    @classmethod
    def ring(cls, n: int, bidirectional: bool = False) -> "CommGraph":
        e = [(i, (i + 1) % n) for i in range(n)]
        if bidirectional:
            e += [((i + 1) % n, i) for i in range(n)]
        return cls.static(n, [p for p in e if p[0] != p[1]])

    @classmethod
    def circulant(cls, n: int, k: int | None = None, offsets: Sequence[int] | None = None) -> "CommGraph":
        """Node ``i`` sends to ``i + o mod n`` for each offset (default ``1..k``)."""
        if offsets is None:
            if k is None or k < 1:
                raise GraphError("circulant graph needs k >= 1 or explicit offsets")
            offsets = range(1, k + 1)
        offsets = sorted({int(o) % n for o in offsets} - {0})
        e = cls._clean(n, [(i, (i + o) % n) for i in range(n) for o in offsets])
        return cls(n, "circulant", lambda t: e, {"offsets": offsets})

    @classmethod
    def regular(cls, n: int, k: int) -> "CommGraph":
        """Undirected ``k``-regular ring lattice (``k`` even): neighbours ``i +- 1..k/2``."""
        if k % 2 or k < 2:
            raise GraphError("regular lattice needs an even k >= 2")
        half = k // 2
        g = cls.circulant(n, offsets=[o for j in range(1, half + 1) for o in (j, -j)])
        return cls(n, "regular", g.edges, {"k": k, **g.params})

    @classmethod
    def erdos_renyi(cls, n: int, p: float | None = None, seed: int = 0,
                    resample: bool = True) -> "CommGraph":
        """Directed G(n, p); default ``p = 1.2 log(n) / n``."""
        if p is None:
            p = min(1.0, 1.2 * math.log(n) / n) if n > 1 else 0.0
        if not 0.0 <= p <= 1.0:
            raise GraphError("edge probability must lie in [0, 1]")
        off = ~np.eye(n, dtype=bool)

        def draw(t):
            mask = (_rng(seed, t, 1).random((n, n)) < p) & off
            return np.argwhere(mask).astype(np.int64)

        return cls(n, "erdos_renyi", draw, {"p": p, "seed": seed, "resample": resample})

    @classmethod
    def script(cls, n: int, edge_sets: Sequence, loop_from: int | None = None) -> "CommGraph":
        """Round ``t`` uses ``edge_sets[t]``; past the end the script repeats from ``loop_from``."""
        sets = [cls._clean(n, es) for es in edge_sets]
        if not sets:
            raise GraphError("script needs at least one edge set")
        L = len(sets)
        start = L - 1 if loop_from is None else int(loop_from)
        if not 0 <= start < L:
            raise GraphError("loop_from outside the script")

        def pick(t):
            if t < L:
                return sets[t]
            return sets[start + (t - start) % (L - start)]

        return cls(n, "script", pick, {"edge_sets": [s.tolist() for s in sets], "loop_from": start})

    @property
    def period_start(self) -> int:
        """First round from which the edge sequence is periodic (scripts) or 0."""
        return self.params.get("loop_from", 0) if self.kind == "script" else 0


def _adjacency(n: int, edges: np.ndarray) -> list[list[int]]:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(int(b))
    return adj


def _bfs(adj, s) -> np.ndarray:
    dist = np.full(len(adj), -1, dtype=np.int64)
    dist[s] = 0
    q = deque([s])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def strongly_connected(n: int, edges: np.ndarray) -> bool:
    """One strongly connected component iff node 0 reaches and is reached by all."""
    if n == 1:
        return True
    fwd = _bfs(_adjacency(n, edges), 0)
    bwd = _bfs(_adjacency(n, edges[:, ::-1]), 0) if edges.size else fwd
    return bool(np.all(fwd >= 0) and np.all(bwd >= 0))


def check_joint_connectivity(graph: CommGraph, window: int = 1, starts: Sequence[int] | None = None) -> bool:
    """Heuristic check of joint strong connectivity.

    For each start round the union of ``E(t), ..., E(t + window - 1)`` must
    be strongly connected. Default start rounds cover one script period, or
    the first 10 windows for random graphs.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if starts is None:
        if graph.is_static:
            starts = [0]
        elif graph.kind == "script":
            L = len(graph.params["edge_sets"])
            starts = range(0, max(L, graph.period_start + 1))
        else:
            starts = range(0, 10 * window, window)
    for t0 in starts:
        parts = [graph.edges(t) for t in range(t0, t0 + window)]
        union = np.unique(np.vstack(parts), axis=0) if parts else np.zeros((0, 2), np.int64)
        if not strongly_connected(graph.n, union):
            return False
    return True


def diameter(graph: CommGraph) -> int:
    """Longest shortest directed path of a static strongly connected graph."""
    if not graph.is_static:
        raise GraphError("diameter is defined here for static graphs only")
    adj = _adjacency(graph.n, graph.edges(0))
    best = 0
    for s in range(graph.n):
        dist = _bfs(adj, s)
        if np.any(dist < 0):
            raise GraphError("graph is not strongly connected")
        best = max(best, int(dist.max()))
    return best


# -- schedules and faults ---------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Which nodes execute a step in each round.

    ``kind`` is ``"all"``, ``"random"`` (each node independently with
    probability ``fraction``, at least one node) or ``"round_robin"``
    (``per_round`` consecutive nodes).
    """

    kind: str = "all"
    fraction: float = 0.5
    per_round: int = 1

    def __post_init__(self):
        if self.kind not in ("all", "random", "round_robin"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.per_round < 1:
            raise ValueError("per_round must be >= 1")

    def active(self, t: int, n: int, seed: int) -> np.ndarray:
        if self.kind == "all":
            return np.ones(n, dtype=bool)
        if self.kind == "random":
            mask = _rng(seed, t).random(n) < self.fraction
            if not mask.any():
                mask[_rng(seed, t, 2).integers(n)] = True
            return mask
        mask = np.zeros(n, dtype=bool)
        start = ((t - 1) * self.per_round) % n
        mask[(start + np.arange(min(self.per_round, n))) % n] = True
        return mask


@dataclass(frozen=True)
class FaultPlan:
    """Node ``i`` fails at round ``t_f``: it still steps in ``t_f`` but never sends again."""

    failures: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "failures", tuple((int(i), int(t)) for i, t in self.failures))
        for i, t in self.failures:
            if t < 1:
                raise ValueError("fail round must be >= 1")

    def fail_round(self, i: int) -> int | None:
        ts = [t for j, t in self.failures if j == i]
        return min(ts) if ts else None

    def validate(self, n: int):
        for i, _ in self.failures:
            if not 0 <= i < n:
                raise ValueError(f"fault plan names node {i} but the network has {n} nodes")


@dataclass(frozen=True)
class StopRule:
    """``max_rounds`` always applies; optionally stop when every live node is
    within ``eps`` of ``z_ref``, or when the maximum objective moved less than
    ``plateau_delta`` over ``plateau_window`` rounds.

    ``extra_rounds`` keeps simulating after the condition fires (flooding the
    final bases before primal recovery); ``RunLog.stop_round`` still reports
    the round at which it fired."""

    max_rounds: int = 2000
    eps: float | None = None
    z_ref: np.ndarray | None = None
    plateau_delta: float | None = None
    plateau_window: int = 10
    extra_rounds: int = 0

    @classmethod
    def all_within(cls, eps: float, z_ref, max_rounds: int = 2000, extra_rounds: int = 0) -> "StopRule":
        if eps <= 0:
            raise ValueError("eps must be positive")
        return cls(max_rounds, eps, np.asarray(z_ref, dtype=float), extra_rounds=extra_rounds)

    @classmethod
    def objective_plateau(cls, delta: float, window: int = 10, max_rounds: int = 2000) -> "StopRule":
        return cls(max_rounds, plateau_delta=delta, plateau_window=window)


@dataclass
class RunLog:
    traces: list = field(default_factory=list)
    stop_round: int = 0
    stop_reason: str = "max_rounds"
    total_rounds: int = 0
    final_queries: np.ndarray | None = None
    queries: np.ndarray | None = None
    gammas: np.ndarray | None = None
    fail_gamma: dict = field(default_factory=dict)
    wall_time: float = 0.0
    z_ref: np.ndarray | None = None
    nodes: list = field(default_factory=list)

    CSV_COLUMNS = ("round", "node", "gamma", "dist_to_ref", "basis_size", "verdict", "slack")

    def rows(self):
        for tr, dist in self.traces:
            yield (tr.round, tr.node, tr.gamma, dist, tr.basis_size, tr.verdict, tr.slack)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows():
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "stop_round": self.stop_round,
            "stop_reason": self.stop_reason,
            "final_z": None if self.final_queries is None else self.final_queries.tolist(),
            "wall_time": self.wall_time,
            "failed": {str(k): v for k, v in self.fail_gamma.items()},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def max_gamma(self) -> np.ndarray:
        """Per-round maximum objective over live nodes; index 0 is the initial state."""
        return np.nanmax(self.gammas, axis=1)


def run(instance, graph: CommGraph, schedule: Schedule | None = None,
        faults: FaultPlan | None = None, stop: StopRule | None = None, seed: int = 0,
        c=None, tol: Tolerances = DEFAULT_TOL, record: bool = True,
        callback: Callable[[int, list], None] | None = None,
        history_cap: int | None = None) -> RunLog:
    """Simulate the protocol.

    Parameters
    ----------
    instance
        Anything with ``d``, ``M``, ``c`` and ``oracles()`` returning one fresh
        oracle per node.
    c : array, optional
        Overrides ``instance.c``.
    record : bool
        Keep the full ``(rounds + 1, n, d)`` query history in the log.
    callback : callable, optional
        Called as ``callback(t, nodes)`` after every round (and with ``t = 0``
        after initialization).
    """
    t_start = time.perf_counter()
    schedule = schedule or Schedule()
    faults = faults or FaultPlan()
    stop = stop or StopRule()
    c = np.asarray(instance.c if c is None else c, dtype=float)
    oracles = instance.oracles()
    n, d = len(oracles), int(instance.d)
    if graph.n != n:
        raise GraphError(f"graph has {graph.n} nodes, instance has {n}")
    faults.validate(n)
    fail_at = {i: faults.fail_round(i) for i in range(n)}

    nodes = [init_node(i, d, instance.M, oracles[i], c, tol) for i in range(n)]
    log = RunLog(z_ref=None if stop.z_ref is None else np.asarray(stop.z_ref, float))
    qs = [np.stack([nd.query for nd in nodes])]
    gs = [np.array([nd.gamma for nd in nodes])]
    if callback:
        callback(0, nodes)
    # messages in flight: sent at round t - 1, read at round t
    outbox: dict[int, BasisMessage] = {i: nodes[i].message(0) for i in range(n)}
    send_round = 0
    inbox: list[dict[int, BasisMessage]] = [dict() for _ in range(n)]
    dead = np.zeros(n, dtype=bool)

    t = 0
    fired = None
    for t in range(1, stop.max_rounds + 1 + stop.extra_rounds):
        if fired is None and t > stop.max_rounds:
            break
        nbrs = graph.in_neighbors(send_round)
        for j in range(n):
            for i in nbrs[j]:
                msg = outbox.get(int(i))
                if msg is not None:
                    inbox[j][int(i)] = msg
        active = schedule.active(t, n, seed) & ~dead
        new_out: dict[int, BasisMessage] = {}
        for j in np.flatnonzero(active):
            msgs = [inbox[j][k] for k in sorted(inbox[j])]
            inbox[j] = {}
            nodes[j], msg, tr = step(nodes[j], msgs, c, tol, history_cap)
            dist = np.nan if log.z_ref is None or nodes[j].query is None else float(
                np.linalg.norm(nodes[j].query - log.z_ref))
            log.traces.append((tr, dist))
            if fail_at[j] is not None and t >= fail_at[j]:
                dead[j] = True
                log.fail_gamma[int(j)] = float(nodes[j].gamma)
                msg = None
            if msg is not None:
                new_out[int(j)] = msg
        for j in range(n):
            if not dead[j] and fail_at[j] is not None and t >= fail_at[j]:
                dead[j] = True  # inactive at its fail round
                log.fail_gamma[int(j)] = float(nodes[j].gamma)
            if nodes[j].failed:
                dead[j] = True
        outbox, send_round = new_out, t
        qs.append(np.stack([nd.query for nd in nodes]))
        g = np.array([nd.gamma for nd in nodes])
        g[dead] = np.nan
        gs.append(g)
        if callback:
            callback(t, nodes)
        if fired is not None:
            if t - fired >= stop.extra_rounds:
                break
            continue
        live = ~dead
        if stop.eps is not None and live.any():
            dz = np.linalg.norm(qs[-1][live] - stop.z_ref, axis=1)
            if np.all(dz <= stop.eps):
                log.stop_reason, fired = "all_within", t
        if fired is None and stop.plateau_delta is not None and len(gs) > stop.plateau_window:
            recent = np.array([np.nanmax(x) if np.isfinite(x).any() else np.nan
                               for x in gs[-stop.plateau_window - 1:]])
            if np.nanmax(recent) - np.nanmin(recent) <= stop.plateau_delta:
                log.stop_reason, fired = "objective_plateau", t
        if fired is not None and stop.extra_rounds == 0:
            break
    log.stop_round = t if fired is None else fired
    log.total_rounds = t
    log.final_queries = qs[-1]
    log.gammas = np.array(gs)
    if record:
        log.queries = np.stack(qs)
    log.nodes = nodes
    log.wall_time = time.perf_counter() - t_start
    return log
