"""Command-line entry point: ``cpc run|validate|reference|recover``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

import numpy as np

from . import experiments as ex
from .problems import InstanceError, load_instance
from .problems.reference import reference_solve
from .recovery import InsufficientColumns, cost_gap, recover, schedule_csv

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpc", description="Cutting-plane consensus experiments")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default: ${ex.OUT_DIR_ENV} or ./cpc_out)")
    p.add_argument("--max-rounds", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    sub = p.add_subparsers(dest="verb", required=True)
    s = sub.add_parser("run", help="run an experiment config")
    s.add_argument("config")
    s = sub.add_parser("validate", help="check a config without running it")
    s.add_argument("config")
    s = sub.add_parser("reference", help="print the centralized reference optimizer")
    s.add_argument("instance")
    s = sub.add_parser("recover", help="primal recovery from a run's column log")
    s.add_argument("runlog", help="run_*.json summary or columns_*.json file")
    s.add_argument("instance")
    return p


def _out_dir(args, cfg=None) -> str:
    return args.out_dir or (cfg.out_dir if cfg else None) or os.environ.get(ex.OUT_DIR_ENV) or "cpc_out"


def _load_cfg(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        if "generate" in cfg.instance:
            cfg.instance["generate"]["seed"] = args.seed
    if args.max_rounds is not None:
        if args.max_rounds < 1:
            raise ex.ConfigError("--max-rounds must be >= 1")
        cfg.max_rounds = args.max_rounds
    if args.eps is not None:
        if not args.eps > 0:
            raise ex.ConfigError("--eps must be positive")
        cfg.eps = args.eps
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args, cfg)
    summary = ex.run_experiment(cfg, out)
    for pt in summary["points"]:
        print(f"n={pt['n']} mean_rounds={pt['mean_rounds']:.2f} "
              f"ci95=[{pt['ci95_lo']:.2f}, {pt['ci95_hi']:.2f}] graph={pt['graph_kind']}")
    print(f"wrote {out}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _load_cfg(args)
    for line in ex.validate(cfg):
        print(line)
    print("OK")
    return 0


def _cmd_reference(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, json.JSONDecodeError, InstanceError) as exc:
        raise ex.ConfigError(f"instance: {exc}") from exc
    ref = reference_solve(inst)
    print(json.dumps({"z_ref": ref.z.tolist(), "gamma": ref.gamma, "max_violation": ref.max_slack,
                      "oracle_calls": ref.oracle_calls}))
    return 0


def _cmd_recover(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, json.JSONDecodeError, InstanceError) as exc:
        raise ex.ConfigError(f"instance: {exc}") from exc
    if not hasattr(inst, "units") and not hasattr(inst, "G"):
        raise ex.ConfigError("primal recovery needs an almost-separable instance")
    path = args.runlog
    with open(path) as fh:
        data = json.load(fh)
    final_z = None
    if "columns" in data and isinstance(data["columns"], str):
        final_z = data.get("final_z")
        path = os.path.join(os.path.dirname(os.path.abspath(path)), data["columns"])
    log = ex.read_columns(path)
    if hasattr(inst, "units"):
        cost = lambda i, x: inst.units[i].cost(x)
        G = [u.G for u in inst.units]
    else:
        cost = inst.cost
        G = inst.G
    rec = recover(log, inst.h, cost)
    pi = rec.pi if final_z is None else np.asarray(final_z)[0][: inst.r]
    dual = inst.dual_function(pi)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    schedule_csv(rec, G, os.path.join(out, "schedule.csv"))
    print(json.dumps({"total_cost": rec.total_cost, "dual_value": dual,
                      "gap": cost_gap(rec, dual), "coupling_residual": rec.residual}))
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cmd = {"run": _cmd_run, "validate": _cmd_validate, "reference": _cmd_reference,
           "recover": _cmd_recover}[args.verb]
    try:
        return cmd(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientColumns as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
