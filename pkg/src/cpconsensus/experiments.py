"""Experiment configuration, sweeps and summary statistics."""
from __future__ import annotations

import copy
import json
import os
import re
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .netsim import CommGraph, FaultPlan, RunLog, Schedule, StopRule, check_joint_connectivity, run
from .problems import InstanceError, instance_from_dict
from .problems.reference import reference_solve
from .recovery import ColumnLog

OUT_DIR_ENV = "CPC_OUT_DIR"
GRAPH_KINDS = ("erdos_renyi", "circulant", "regular", "ring", "complete", "static", "script")


class ConfigError(ValueError):
    """Schema or semantic violation; ``line`` points into the config text when known."""

    def __init__(self, message, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def mean_ci(samples, level: float = 0.95) -> tuple[float, float, float]:
    """Sample mean and Student-t confidence bounds."""
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    if x.size < 2:
        return m, m, m
    half = float(stats.t.ppf(0.5 + level / 2, x.size - 1) * x.std(ddof=1) / np.sqrt(x.size))
    return m, m - half, m + half


def build_graph(spec: dict, n: int, seed: int) -> CommGraph:
    kind = spec.get("kind")
    if kind == "erdos_renyi":
        return CommGraph.erdos_renyi(n, spec.get("p"), seed=int(spec.get("seed", seed)),
                                     resample=bool(spec.get("resample", True)))
    if kind == "circulant":
        return CommGraph.circulant(n, int(spec.get("k", 5)))
    if kind == "regular":
        return CommGraph.regular(n, int(spec.get("k", 2)))
    if kind == "ring":
        return CommGraph.ring(n, bool(spec.get("bidirectional", False)))
    if kind == "complete":
        return CommGraph.complete(n)
    if kind == "static":
        return CommGraph.static(n, spec["edges"])
    if kind == "script":
        return CommGraph.script(n, spec["edge_sets"], spec.get("loop_from"))
    raise ConfigError(f"unknown graph kind {kind!r}")


@dataclass
class ExperimentConfig:
    instance: dict
    graph: dict
    schedule: dict
    faults: list
    eps: float = 0.1
    max_rounds: int = 2000
    seed: int = 0
    repetitions: int = 10
    sweep_n: list | None = None
    out_dir: str | None = None
    stop: str = "all_within"
    text: str | None = None

    @classmethod
    def from_dict(cls, data: dict, text: str | None = None, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", 1)
        for key in ("instance", "graph"):
            if key not in data:
                raise ConfigError(f"missing required field '{key}'", 1)
        inst = data["instance"]
        if isinstance(inst, str):
            path = inst if os.path.isabs(inst) else os.path.join(base_dir, inst)
            if not os.path.exists(path):
                raise ConfigError(f"instance file {inst!r} does not exist", _line_of(text, "instance"))
            with open(path) as fh:
                inst = json.load(fh)
        if not isinstance(inst, dict) or "kind" not in inst:
            raise ConfigError("instance needs a 'kind' tag", _line_of(text, "instance"))
        graph = data["graph"]
        if not isinstance(graph, dict) or graph.get("kind") not in GRAPH_KINDS:
            raise ConfigError(f"graph kind must be one of {GRAPH_KINDS}", _line_of(text, "graph"))
        stop = data.get("stop", {})
        eps = float(stop.get("eps", 0.1))
        if not eps > 0:
            raise ConfigError("eps must be positive", _line_of(text, "eps"))
        max_rounds = int(stop.get("max_rounds", 2000))
        if max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1", _line_of(text, "max_rounds"))
        rule = stop.get("rule", "all_within")
        if rule not in ("all_within", "max_rounds"):
            raise ConfigError("stop rule must be 'all_within' or 'max_rounds'", _line_of(text, "rule"))
        reps = int(data.get("repetitions", 10))
        if reps < 1:
            raise ConfigError("repetitions must be >= 1", _line_of(text, "repetitions"))
        faults = data.get("faults", [])
        if not isinstance(faults, list) or any(not isinstance(f, (list, tuple)) or len(f) != 2 for f in faults):
            raise ConfigError("faults must be a list of [node, fail_round] pairs", _line_of(text, "faults"))
        sweep = data.get("sweep", {}).get("n")
        if sweep is not None and (not isinstance(sweep, list) or not all(int(v) >= 1 for v in sweep)):
            raise ConfigError("sweep.n must be a list of positive integers", _line_of(text, "sweep"))
        schedule = data.get("schedule", {"kind": "all"})
        try:
            Schedule(**schedule)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad schedule: {exc}", _line_of(text, "schedule")) from exc
        return cls(inst, graph, schedule, [list(f) for f in faults], eps, max_rounds,
                   int(data.get("seed", 0)), reps, sweep, data.get("out_dir"), rule, text)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from exc
        return cls.from_dict(data, text, os.path.dirname(os.path.abspath(path)))

    def points(self) -> list:
        """``(n, instance dict)`` per sweep point; ``n`` is ``None`` without a sweep."""
        if not self.sweep_n:
            return [(None, self.instance)]
        if "generate" not in self.instance:
            raise ConfigError("sweeps need a generated instance", _line_of(self.text, "sweep"))
        out = []
        for n in self.sweep_n:
            inst = copy.deepcopy(self.instance)
            inst["generate"]["n"] = int(n)
            out.append((int(n), inst))
        return out

    def instance_for(self, inst_dict: dict, rep: int):
        data = copy.deepcopy(inst_dict)
        if "generate" in data and rep:
            data["generate"]["seed"] = int(data["generate"].get("seed", self.seed)) + rep
        return instance_from_dict(data)


def validate(cfg: ExperimentConfig) -> list[str]:
    """Semantic checks without running. Returns report lines; raises on errors."""
    report = []
    for n_pt, inst_dict in cfg.points():
        try:
            inst = cfg.instance_for(inst_dict, 0)
        except InstanceError as exc:
            raise ConfigError(f"instance: {exc}", _line_of(cfg.text, "instance")) from exc
        n = inst.n
        for node, _ in cfg.faults:
            if not 0 <= int(node) < n:
                raise ConfigError(f"fault plan names node {node} but the network has {n} nodes",
                                  _line_of(cfg.text, "faults"))
        try:
            FaultPlan(tuple(cfg.faults))
            g = build_graph(cfg.graph, n, cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc), _line_of(cfg.text, "graph")) from exc
        window = 1 if g.is_static else max(5, n)
        conn = check_joint_connectivity(g, window)
        feas = _certificate_ok(inst)
        report.append(f"n={n} kind={inst.kind} graph={g.kind} joint_connectivity={'ok' if conn else 'FAILED'}"
                      f" feasibility_certificate={'ok' if feas else 'FAILED'}")
        if not conn:
            raise ConfigError(f"graph is not jointly strongly connected over window {window}",
                              _line_of(cfg.text, "graph"))
        if not feas:
            raise ConfigError("instance has no feasibility certificate", _line_of(cfg.text, "instance"))
    return report


def _certificate_ok(inst) -> bool:
    if hasattr(inst, "check_certificate"):
        return inst.check_certificate()
    z = inst.feasible_point()
    return all(o.value(z) <= 1e-9 for o in inst.oracles())


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Run every sweep point and repetition; write logs, summary and plot data."""
    os.makedirs(out_dir, exist_ok=True)
    validate(cfg)
    sched = Schedule(**cfg.schedule)
    faults = FaultPlan(tuple(tuple(f) for f in cfg.faults))
    points = []
    for n_pt, inst_dict in cfg.points():
        rounds = []
        for rep in range(cfg.repetitions):
            inst = cfg.instance_for(inst_dict, rep)
            seed = cfg.seed + rep
            g = build_graph(cfg.graph, inst.n, seed)
            ref = reference_solve(inst)
            if cfg.stop == "all_within":
                stop = StopRule.all_within(cfg.eps, ref.z, cfg.max_rounds)
            else:
                stop = StopRule(cfg.max_rounds)
            log = run(inst, g, sched, faults, stop, seed, record=False, history_cap=200)
            tag = f"n{inst.n}_rep{rep}"
            log.to_csv(os.path.join(out_dir, f"runlog_{tag}.csv"))
            summary = log.summary()
            summary["z_ref"] = ref.z.tolist()
            summary["gamma_ref"] = ref.gamma
            if any(nd.history for nd in log.nodes):
                cpath = os.path.join(out_dir, f"columns_{tag}.json")
                write_columns(ColumnLog.from_nodes(log.nodes), cpath)
                summary["columns"] = os.path.basename(cpath)
            with open(os.path.join(out_dir, f"run_{tag}.json"), "w") as fh:
                json.dump(summary, fh, indent=2)
            rounds.append(log.stop_round)
        m, lo, hi = mean_ci(rounds)
        points.append({"n": n_pt if n_pt is not None else inst.n, "rounds": rounds,
                       "mean_rounds": m, "ci95_lo": lo, "ci95_hi": hi, "ci95_half": m - lo,
                       "graph_kind": cfg.graph["kind"]})
    summary = {"points": points, "repetitions": cfg.repetitions, "eps": cfg.eps, "seed": cfg.seed}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    write_plot_csv(points, os.path.join(out_dir, "plot.csv"))
    return summary


def write_plot_csv(points, path):
    with open(path, "w") as fh:
        fh.write("n,mean_rounds,ci95_lo,ci95_hi,graph_kind\n")
        for p in points:
            fh.write(f"{p['n']},{p['mean_rounds']!r},{p['ci95_lo']!r},{p['ci95_hi']!r},{p['graph_kind']}\n")


def write_columns(log: ColumnLog, path):
    data = {"n": log.n, "columns": {str(i): [{"x": c.x.tolist(), "Gx": c.Gx.tolist(), "cost": c.cost}
                                             for c in cols] for i, cols in log.columns.items()}}
    with open(path, "w") as fh:
        json.dump(data, fh)


def read_columns(path) -> ColumnLog:
    from .oracles import Column
    with open(path) as fh:
        data = json.load(fh)
    log = ColumnLog(int(data["n"]))
    for i, cols in data["columns"].items():
        for c in cols:
            log.add(int(i), Column(np.asarray(c["x"]), np.asarray(c["Gx"]), float(c["cost"]), int(i)))
    return log


def summarize_logs(paths) -> dict:
    """Recompute mean rounds and CI from raw RunLog CSV files."""
    rounds = []
    for p in paths:
        arr = np.genfromtxt(p, delimiter=",", names=True, dtype=None, encoding=None)
        rounds.append(int(np.max(arr["round"])) if arr.size else 0)
    m, lo, hi = mean_ci(rounds)
    return {"rounds": rounds, "mean_rounds": m, "ci95_lo": lo, "ci95_hi": hi}

