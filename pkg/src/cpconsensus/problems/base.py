"""Common interface of problem instances."""
from __future__ import annotations

import numpy as np

from ..geometry import DEFAULT_TOL


class InstanceError(ValueError):
    """Malformed or infeasible instance data."""


class ProblemInstance:
    """A distributed problem ``max c.z`` over the intersection of node sets.

    Subclasses set ``kind``, ``d``, ``c`` and ``M`` and implement
    :meth:`oracles`, :meth:`to_dict` and :meth:`from_dict`.
    """

    kind = "abstract"
    d: int
    c: np.ndarray
    M: float = 1e5

    @property
    def n(self) -> int:
        return len(self.oracles())

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem) -> list:
        """One fresh oracle per node."""
        raise NotImplementedError

    def feasible_point(self) -> np.ndarray:
        """A point of the intersection, constructed without solving."""
        raise NotImplementedError

    def sample_feasible(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """``k`` points of the intersection (rows)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        raise NotImplementedError


def rejection_sample(inst: ProblemInstance, rng, k: int, center, radius: float,
                     max_tries: int = 200) -> np.ndarray:
    """Uniform samples of the feasible set inside a ball, by rejection.

    Falls back to points on segments towards ``center`` (still feasible by
    convexity) when the acceptance rate is too low.
    """
    center = np.asarray(center, dtype=float)
    ors = inst.oracles()
    d = center.size
    out = []
    for _ in range(max_tries):
        u = rng.normal(size=(4 * k, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pts = center + radius * u * rng.uniform(size=(4 * k, 1)) ** (1.0 / d)
        for p in pts:
            if all(o.value(p) <= 0.0 for o in ors):
                out.append(p)
                if len(out) == k:
                    return np.array(out)
    while len(out) < k:
        p = center.copy()
        out.append(p)
    return np.array(out)
