"""Problem families and their JSON instance files."""
from __future__ import annotations

import json

from .base import InstanceError, ProblemInstance
from .inequality import InequalityInstance, gen_inequality
from .localization import LocalizationInstance, four_sensor_instance
from .microgrid import MicrogridInstance, gen_microgrid
from .reference import ReferenceError, ReferenceSolution, reference_solve
from .robust_lp import RobustLpInstance, gen_dunham_robust_lp
from .separable import SeparableInstance, gen_separable

KINDS = {
    "robust_lp": RobustLpInstance,
    "localization": LocalizationInstance,
    "microgrid": MicrogridInstance,
    "inequality": InequalityInstance,
    "separable": SeparableInstance,
}

GENERATORS = {
    "robust_lp": lambda p: gen_dunham_robust_lp(int(p["d"]), int(p["n"]), int(p["seed"]),
                                                float(p.get("M", 1e3))),
    "inequality": lambda p: gen_inequality(int(p["d"]), int(p["n"]), int(p["seed"]),
                                           float(p.get("M", 100.0))),
    "separable": lambda p: gen_separable(int(p["r"]), int(p["n"]), int(p["seed"]),
                                         float(p.get("M", 1e3))),
    "microgrid": lambda p: gen_microgrid(int(p["seed"]), **{k: p[k] for k in (
        "T", "n_gen", "n_storage", "n_load", "D0", "amplitude", "sigma", "M") if k in p}),
    "localization": lambda p: four_sensor_instance(tuple(p.get("truth", (0.3, 0.4))),
                                                   float(p.get("M", 100.0))),
}


def instance_from_dict(data: dict) -> ProblemInstance:
    """Build an instance from explicit data or, with ``"generate": {...}``, from a generator."""
    if not isinstance(data, dict) or "kind" not in data:
        raise InstanceError("instance needs a 'kind' tag")
    kind = data["kind"]
    if kind not in KINDS:
        raise InstanceError(f"unknown instance kind {kind!r}")
    if "generate" in data:
        params = dict(data["generate"])
        if "seed" not in params and kind != "localization":
            raise InstanceError("generated instances need an explicit seed")
        inst = GENERATORS[kind](params)
        if kind == "localization" and "objective" in data:
            inst = inst.with_objective(data["objective"])
        return inst
    try:
        return KINDS[kind].from_dict(data)
    except KeyError as exc:
        raise InstanceError(f"{kind} instance is missing field {exc}") from exc


def load_instance(path) -> ProblemInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: ProblemInstance, path):
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh)


__all__ = [
    "InstanceError", "ProblemInstance", "InequalityInstance", "LocalizationInstance",
    "MicrogridInstance", "RobustLpInstance", "SeparableInstance", "ReferenceError",
    "ReferenceSolution", "gen_dunham_robust_lp", "gen_inequality", "gen_microgrid",
    "gen_separable", "four_sensor_instance", "reference_solve", "instance_from_dict",
    "load_instance", "save_instance", "KINDS",
]
