"""Experiment runner CLI.

Subcommands: run (presets / free-form configs), verify (quadratic
neighborhood harness), lambda0 (consensus-threshold query), gen-graph.
Runs write <out>/metrics.csv plus <out>/manifest.json; sweep presets write
one subdirectory per point and an index file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import presets
from .algorithms import ConfigError, TheoreticalSchedule, AlgoConfig
from .analysis import (default_eps, lambda_zero, solve_penalized_exact,
                       theory_constants, verify_neighborhood)
from .attacks import SameValue
from .engine import ExperimentConfig, run as run_experiment, write_manifest
from .graph import (Static, Topology, assign_byzantine, gen_erdos_renyi)
from .objectives import QuadraticObjective, global_optimum

VERSION = "byzrobust-0.1.0"

# CLI flag -> config key (flags not listed map to themselves).
FLAG_KEYS = {"lambda": "lam", "data_dir": "data_dir"}


def _read_config_file(path: str) -> dict:
    if path.endswith(".json"):
        with open(path) as fh:
            payload = json.load(fh)
        return payload.get("config", payload)
    cfg = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            cfg[key.strip()] = val.strip()
    return cfg


def _cmd_run(args) -> int:
    overrides: dict = {}
    if args.config:
        overrides.update(_read_config_file(args.config))
    for flag in ("seed", "iters", "b", "pe", "norm", "attack", "step",
                 "data_dir", "method"):
        val = getattr(args, flag, None)
        if val is not None:
            overrides[FLAG_KEYS.get(flag, flag)] = val
    if getattr(args, "lam", None) is not None:
        overrides["lam"] = args.lam

    preset = args.preset or overrides.pop("preset", None)
    cfg = presets.resolve(preset, overrides)

    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    points = presets.sweep_points(cfg)
    index = []
    for label, point_cfg in points:
        pdir = outdir if len(points) == 1 else os.path.join(outdir, label)
        os.makedirs(pdir, exist_ok=True)
        experiment = presets.build_experiment(point_cfg)
        log = run_experiment(experiment)
        log.to_csv(os.path.join(pdir, "metrics.csv"))
        write_manifest(os.path.join(pdir, "manifest.json"), point_cfg,
                       int(point_cfg["seed"]), log.wall_time, VERSION)
        index.append({"label": label, "dir": pdir})
        print(f"{label}: wrote {pdir}/metrics.csv "
              f"({len(log.records)} records, {log.wall_time:.1f}s)")
    if len(points) > 1:
        with open(os.path.join(outdir, "index.json"), "w") as fh:
            json.dump(index, fh, indent=2)
            fh.write("\n")
    return 0


def _quad_harness(n: int, b: int, lam_scale: float, noise: float, seed: int,
                  rounds: int, n_seeds: int, dim: int = 1):
    """Quadratic instance with declared constants under a same-value attack,
    run on the theoretical step schedule over several seeds."""
    topo = assign_byzantine(gen_erdos_renyi(n, 0.6, seed), b, seed + 1)
    rng = np.random.default_rng(seed + 2)
    quads = {i: QuadraticObjective(rng.normal(size=dim), curvature=1.0,
                                   noise_std=noise) for i in range(n)}
    reg_quads = {i: quads[i] for i in topo.regular}
    objs = list(reg_quads.values())
    xs = global_optimum(objs)
    lam = lam_scale * max(lambda_zero(topo, objs, xs), 1e-3)
    eps = default_eps(objs)
    # Unit curvature, so the contraction rate is 1 - eps; the decaying-phase
    # coefficient must strictly exceed its reciprocal.
    bundle = theory_constants(reg_quads, topo, lam, eps,
                              alpha_high=2.0 / (1.0 - eps), p=dim)
    x_star = solve_penalized_exact(reg_quads, topo, lam)
    steps = TheoreticalSchedule(bundle.alpha_low, bundle.alpha_high)
    logs = []
    for s in range(n_seeds):
        config = ExperimentConfig(
            schedule=Static(topo), objectives=quads,
            algo=AlgoConfig(method="proposed", lam=lam), steps=steps,
            iterations=rounds, attack=SameValue(100.0), eval_every=10,
            seed=seed + 1000 + s, reference=x_star)
        logs.append(run_experiment(config))
    return logs, bundle


def _cmd_verify(args) -> int:
    logs, bundle = _quad_harness(n=args.n, b=args.b, lam_scale=args.lam_scale,
                                 noise=args.noise, seed=args.seed,
                                 rounds=args.rounds, n_seeds=args.seeds)
    report = verify_neighborhood(logs, bundle, bundle.alpha_high)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "neighborhood_report.json")
    report.to_json(path)
    print(f"bound={report.bound:.4g} empirical={report.empirical_mean:.4g} "
          f"passed={report.passed} -> {path}")
    return 0 if report.passed else 1


def _parse_task(task: str) -> list[QuadraticObjective]:
    """Task spec "quad:t0,t1,..." -> unit-curvature scalar quadratics."""
    kind, _, rest = task.partition(":")
    if kind != "quad":
        raise ConfigError(f"unsupported task {task!r}; expected quad:t0,t1,...")
    targets = [float(v) for v in rest.split(",") if v != ""]
    if not targets:
        raise ConfigError("task needs at least one target value")
    return [QuadraticObjective(np.array([t])) for t in targets]


def _cmd_lambda0(args) -> int:
    topo = Topology.load(args.graph)
    objs = _parse_task(args.task)
    if len(objs) != len(topo.regular):
        raise ConfigError(f"task lists {len(objs)} objectives but the graph "
                          f"has {len(topo.regular)} regular agents")
    xs = global_optimum(objs)
    weights = None
    if args.pe is not None:
        weights = {e: args.pe for e in topo.regular_edges}
    print(f"{lambda_zero(topo, objs, xs, weights):.10g}")
    return 0


def _cmd_gen_graph(args) -> int:
    topo = gen_erdos_renyi(args.n, args.p, args.seed)
    if args.b:
        topo = assign_byzantine(topo, args.b, args.seed + 1)
    topo.save(args.out)
    print(f"wrote {args.out}: n={topo.n}, {len(topo.edges)} edges, "
          f"{len(topo.byzantine)} Byzantine")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="byzrobust")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario preset or config")
    p_run.add_argument("--preset", choices=sorted(presets.PRESETS))
    p_run.add_argument("--config", help="flat key=value file or a manifest.json")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--iters", type=int)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--lambda", dest="lam", type=float)
    p_run.add_argument("--step", type=float)
    p_run.add_argument("--attack")
    p_run.add_argument("--b", type=int)
    p_run.add_argument("--pe", type=float)
    p_run.add_argument("--norm", choices=["l1", "l2", "linf"])
    p_run.add_argument("--method", choices=["proposed", "dpsgd", "bridge_s"])
    p_run.add_argument("--data-dir", dest="data_dir")
    p_run.set_defaults(func=_cmd_run)

    p_ver = sub.add_parser("verify", help="neighborhood-bound harness on quadratics")
    p_ver.add_argument("--n", type=int, default=10)
    p_ver.add_argument("--b", type=int, default=1)
    p_ver.add_argument("--lam-scale", type=float, default=1.5)
    p_ver.add_argument("--noise", type=float, default=0.1)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--rounds", type=int, default=20000)
    p_ver.add_argument("--seeds", type=int, default=5)
    p_ver.add_argument("--out", required=True)
    p_ver.set_defaults(func=_cmd_verify)

    p_l0 = sub.add_parser("lambda0", help="consensus threshold for a graph/task")
    p_l0.add_argument("--graph", required=True)
    p_l0.add_argument("--task", required=True)
    p_l0.add_argument("--pe", type=float, help="uniform edge frequency weight")
    p_l0.set_defaults(func=_cmd_lambda0)

    p_gg = sub.add_parser("gen-graph", help="generate an Erdos-Renyi topology file")
    p_gg.add_argument("--n", type=int, required=True)
    p_gg.add_argument("--p", type=float, required=True)
    p_gg.add_argument("--b", type=int, default=0)
    p_gg.add_argument("--seed", type=int, default=0)
    p_gg.add_argument("--out", required=True)
    p_gg.set_defaults(func=_cmd_gen_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
