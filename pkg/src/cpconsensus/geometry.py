"""Half-spaces, cut collections and the box used to start every node."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .kernels import near_duplicate_mask


class DimensionError(ValueError):
    """Raised when vectors of incompatible length meet."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package.

    ``feas`` is absolute on normalized cuts; ``mem`` is the oracle membership
    threshold; ``sub`` is the optimality target for local subproblems.
    """

    feas: float = 1e-8
    opt: float = 1e-7
    act: float = 1e-7
    dup: float = 1e-9
    mem: float = 1e-7
    sub: float = 1e-8


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{z : a.z <= b}``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = float(self.b)
        if a.size == 0:
            raise DimensionError("half-space normal must be non-empty")
        if not (np.all(np.isfinite(a)) and np.isfinite(b)):
            raise ValueError("half-space data must be finite")
        if not np.linalg.norm(a) > 0.0:
            raise ValueError("half-space normal must be nonzero")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.a.size

    def normalized(self) -> "HalfSpace":
        n = np.linalg.norm(self.a)
        return HalfSpace(self.a / n, self.b / n)

    def to_wire(self) -> np.ndarray:
        """Serialize as the ``d+1`` doubles ``(a_1, ..., a_d, b)``."""
        return np.append(self.a, self.b).astype(np.float64)

    @classmethod
    def from_wire(cls, data: Sequence[float]) -> "HalfSpace":
        arr = np.asarray(data, dtype=np.float64).ravel()
        if arr.size < 2:
            raise DimensionError("wire payload needs at least 2 numbers")
        return cls(arr[:-1], arr[-1])


def violation(h: HalfSpace, z) -> float:
    """Signed slack ``a.z - b``; positive means ``z`` lies outside ``h``."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size != h.dim:
        raise DimensionError(f"point has dimension {z.size}, cut has {h.dim}")
    return float(h.a @ z - h.b)


@dataclass(frozen=True)
class CutOrigin:
    """Where a cut came from: generating node (-1 for the box), round, serial."""

    node: int = -1
    round: int = 0
    serial: int = 0


class CutCollection:
    """An ordered, duplicate-free set of normalized cuts.

    Rows of ``A`` are unit normals and ``b`` the matching offsets, so the
    induced polyhedron is ``{z : A z <= b}``. Instances are immutable.
    """

    __slots__ = ("A", "b", "origins")

    def __init__(self, A, b, origins: Sequence[CutOrigin] | None = None, *,
                 normalized: bool = False, tol_dup: float = DEFAULT_TOL.dup):
        A = np.array(A, dtype=np.float64, ndmin=2)
        b = np.array(b, dtype=np.float64).ravel()
        if A.shape[0] != b.size:
            raise DimensionError("A and b disagree on the number of cuts")
        if origins is None:
            origins = [CutOrigin(-1, 0, k) for k in range(b.size)]
        origins = tuple(origins)
        if len(origins) != b.size:
            raise DimensionError("one origin record is needed per cut")
        if b.size and not normalized:
            norms = np.linalg.norm(A, axis=1)
            if np.any(norms <= 0.0) or not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
                raise ValueError("cuts must have finite data and nonzero normals")
            A = A / norms[:, None]
            b = b / norms
        if b.size > 1:
            dup = near_duplicate_mask(A, b, tol_dup)
            if dup.any():
                keep = ~dup
                A, b = A[keep], b[keep]
                origins = tuple(o for o, k in zip(origins, keep) if k)
        A = np.ascontiguousarray(A)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "origins", origins)

    def __setattr__(self, name, value):
        raise AttributeError("CutCollection is immutable")

    @classmethod
    def empty(cls, d: int) -> "CutCollection":
        return cls(np.zeros((0, d)), np.zeros(0), (), normalized=True)

    @classmethod
    def from_halfspaces(cls, cuts: Iterable[HalfSpace],
                        origins: Sequence[CutOrigin] | None = None, d: int | None = None,
                        tol_dup: float = DEFAULT_TOL.dup) -> "CutCollection":
        cuts = list(cuts)
        if not cuts:
            if d is None:
                raise DimensionError("dimension needed for an empty collection")
            return cls.empty(d)
        dims = {h.dim for h in cuts}
        if len(dims) != 1:
            raise DimensionError("cuts of mixed dimension")
        A = np.vstack([h.a for h in cuts])
        b = np.array([h.b for h in cuts])
        return cls(A, b, origins, tol_dup=tol_dup)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def __len__(self) -> int:
        return self.b.size

    def __iter__(self) -> Iterator[HalfSpace]:
        for k in range(len(self)):
            yield HalfSpace(self.A[k], self.b[k])

    def __getitem__(self, k: int) -> HalfSpace:
        return HalfSpace(self.A[k], self.b[k])

    def __repr__(self):
        return f"CutCollection(m={len(self)}, d={self.dim})"

    def subset(self, idx) -> "CutCollection":
        idx = np.asarray(idx, dtype=np.int64).ravel()
        return CutCollection(self.A[idx], self.b[idx], [self.origins[i] for i in idx],
                             normalized=True)

    def union(self, *others: "CutCollection", tol_dup: float = DEFAULT_TOL.dup) -> "CutCollection":
        """Concatenate collections, keeping the first copy of any duplicate."""
        parts = [self] + [o for o in others if len(o)]
        if len(parts) == 1:
            return self
        for o in parts[1:]:
            if o.dim != self.dim:
                raise DimensionError("cannot merge collections of different dimension")
        A = np.vstack([p.A for p in parts])
        b = np.concatenate([p.b for p in parts])
        origins = [o for p in parts for o in p.origins]
        return CutCollection(A, b, origins, normalized=True, tol_dup=tol_dup)

    def add(self, h: HalfSpace, origin: CutOrigin | None = None) -> "CutCollection":
        origin = origin if origin is not None else CutOrigin()
        return self.union(CutCollection(h.a[None, :], [h.b], [origin]))

    def slacks(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.dim:
            raise DimensionError(f"point has dimension {z.size}, cuts have {self.dim}")
        return self.A @ z - self.b

    def to_wire(self) -> np.ndarray:
        """``(m, d+1)`` array of doubles, one cut per row."""
        return np.hstack([self.A, self.b[:, None]])

    @classmethod
    def from_wire(cls, data, origins: Sequence[CutOrigin] | None = None) -> "CutCollection":
        data = np.asarray(data, dtype=np.float64)
        return cls(data[:, :-1], data[:, -1], origins)


def contains(H: CutCollection, z, tol: float = 0.0) -> bool:
    """True iff ``z`` satisfies every cut of ``H`` up to ``tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if len(H) == 0:
        return True
    return bool(np.all(H.slacks(z) <= tol))


def box_basis(d: int, M: float) -> CutCollection:
    """The ``2d`` cuts ``z_k <= M`` and ``-z_k <= M``."""
    if int(d) != d or d <= 0:
        raise DimensionError("box dimension must be a positive integer")
    if not M > 0:
        raise ValueError("box half-width must be positive")
    d = int(d)
    eye = np.eye(d)
    A = np.vstack([eye, -eye])
    b = np.full(2 * d, float(M))
    origins = [CutOrigin(-1, 0, k) for k in range(2 * d)]
    return CutCollection(A, b, origins, normalized=True)
