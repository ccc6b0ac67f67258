"""Set-membership position estimation from disk and cone sensors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import DEFAULT_TOL
from ..oracles import AffineMax, CompositeOracle, disk_constraint
from .base import InstanceError, ProblemInstance

OBJECTIVES = {
    "x_upper": np.array([1.0, 0.0]),
    "x_lower": np.array([-1.0, 0.0]),
    "y_upper": np.array([0.0, 1.0]),
    "y_lower": np.array([0.0, -1.0]),
}


def cone_rows(apex, heading: float, half_angle: float, reach: float):
    """Three cuts: two bounding the angle around ``heading``, one the range."""
    apex = np.asarray(apex, dtype=float)
    if not 0 < half_angle < np.pi / 2:
        raise InstanceError("cone half-angle must lie in (0, pi/2)")
    A, b = [], []
    for sgn in (1.0, -1.0):
        phi = heading + sgn * half_angle
        # outward normal of the edge at angle phi
        nrm = sgn * np.array([-np.sin(phi), np.cos(phi)])
        A.append(nrm)
        b.append(nrm @ apex)
    ax = np.array([np.cos(heading), np.sin(heading)])
    A.append(ax)
    b.append(ax @ apex + reach)
    return np.array(A), np.array(b)


@dataclass(eq=False)
class LocalizationInstance(ProblemInstance):
    """Sensors are dicts with ``type`` in ``disk | cone | quadrant`` and fields
    ``position``, ``r`` (disk), ``heading``, ``half_angle``, ``reach`` (cone)."""

    sensors: list
    M: float = 100.0
    truth: np.ndarray | None = None
    objective: str = "x_upper"
    kind = "localization"

    def __post_init__(self):
        if not self.sensors:
            raise InstanceError("need at least one sensor")
        if self.objective not in OBJECTIVES:
            raise InstanceError(f"unknown objective {self.objective!r}")
        for s in self.sensors:
            if s.get("type") not in ("disk", "cone", "quadrant"):
                raise InstanceError(f"unknown sensor type {s.get('type')!r}")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=float)

    d = 2

    @property
    def c(self):
        return OBJECTIVES[self.objective]

    @property
    def n(self):
        return len(self.sensors)

    def with_objective(self, name: str) -> "LocalizationInstance":
        return LocalizationInstance(self.sensors, self.M, self.truth, name)

    def _make(self, s, tol_mem):
        parts = []
        if s["type"] in ("disk", "quadrant"):
            parts.append(disk_constraint(s["position"], s["r"], tol_mem))
        if s["type"] in ("cone", "quadrant"):
            A, b = cone_rows(s["position"], s["heading"], s["half_angle"], s["reach"])
            parts.append(AffineMax(A, b, tol_mem))
        return parts[0] if len(parts) == 1 else CompositeOracle(parts)

    def oracles(self, tol_mem: float = DEFAULT_TOL.mem):
        return [self._make(s, tol_mem) for s in self.sensors]

    def membership(self, pts) -> np.ndarray:
        """Vectorized feasibility of an ``(N, 2)`` array of points."""
        pts = np.atleast_2d(pts)
        ok = np.ones(len(pts), dtype=bool)
        for s in self.sensors:
            v = np.asarray(s["position"], dtype=float)
            if s["type"] in ("disk", "quadrant"):
                ok &= np.linalg.norm(pts - v, axis=1) <= s["r"]
            if s["type"] in ("cone", "quadrant"):
                A, b = cone_rows(v, s["heading"], s["half_angle"], s["reach"])
                ok &= np.all(pts @ A.T <= b, axis=1)
        return ok

    def feasible_point(self):
        if self.truth is None:
            raise InstanceError("no ground-truth point recorded")
        return self.truth.copy()

    def sample_feasible(self, rng, k):
        out = []
        lo, hi = self.truth - 3.0, self.truth + 3.0
        while len(out) < k:
            pts = rng.uniform(lo, hi, size=(20 * k, 2))
            out.extend(pts[self.membership(pts)])
        return np.array(out[:k])

    def to_dict(self):
        def enc(s):
            return {k: (np.asarray(v).tolist() if isinstance(v, (list, np.ndarray)) else v)
                    for k, v in s.items()}
        return {"kind": self.kind, "sensors": [enc(s) for s in self.sensors], "M": self.M,
                "truth": None if self.truth is None else self.truth.tolist(),
                "objective": self.objective}

    @classmethod
    def from_dict(cls, data):
        return cls(list(data["sensors"]), float(data.get("M", 100.0)), data.get("truth"),
                   data.get("objective", "x_upper"))


def four_sensor_instance(truth=(0.3, 0.4), M: float = 100.0) -> LocalizationInstance:
    """Two disks, one cone and one quadrant sensor on the unit square corners."""
    truth = np.asarray(truth, dtype=float)

    def toward(v, skew):
        dv = truth - np.asarray(v, dtype=float)
        return float(np.arctan2(dv[1], dv[0]) + skew)

    sensors = [
        {"type": "disk", "position": [0.0, 0.0], "r": float(np.linalg.norm(truth) + 0.15)},
        {"type": "disk", "position": [1.0, 0.0],
         "r": float(np.linalg.norm(truth - [1.0, 0.0]) + 0.1)},
        {"type": "cone", "position": [1.0, 1.0], "heading": toward([1.0, 1.0], 0.05),
         "half_angle": 0.25, "reach": float(np.linalg.norm(truth - 1.0) + 0.2)},
        {"type": "quadrant", "position": [0.0, 1.0], "r": float(np.linalg.norm(truth - [0.0, 1.0]) + 0.2),
         "heading": toward([0.0, 1.0], -0.1), "half_angle": 0.4, "reach": 2.0},
    ]
    inst = LocalizationInstance(sensors, M, truth)
    if not inst.membership(truth)[0]:  # pragma: no cover
        raise InstanceError("ground truth outside the sensed sets")
    return inst
