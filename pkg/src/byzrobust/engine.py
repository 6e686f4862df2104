"""Round-synchronous simulation driver.

All round-k messages (honest and crafted) are functions of the round-k
snapshot; updates commit before round k+1. Everything is seeded through the
master seed, so a config reproduces its metrics log byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import algorithms as alg
from . import attacks as atk
from .graph import (NetworkSchedule, Periodic, RandomActivation, Static,
                    Topology, regular_subgraph_connected)
from .objectives import LocalObjective, SoftmaxObjective

CSV_HEADER = "k,consensus_variance,dist_sq,accuracy"


class EngineError(RuntimeError):
    pass


def consensus_variance(models) -> float:
    """Mean squared deviation of the models from their coordinate-wise mean."""
    stack = np.stack(list(models))
    mean = stack.mean(axis=0)
    return float(np.mean(np.sum((stack - mean) ** 2, axis=1)))


def dist_sq_to(models, ref: np.ndarray) -> float:
    """Stacked squared distance sum_i ||x_i - ref_i||^2; a 1-D ref is
    broadcast to every agent."""
    stack = np.stack(list(models))
    ref = np.asarray(ref, dtype=float)
    if ref.ndim == 1:
        ref = np.broadcast_to(ref, stack.shape)
    if ref.shape != stack.shape:
        raise EngineError(f"reference shape {ref.shape} does not match models {stack.shape}")
    return float(np.sum((stack - ref) ** 2))


@dataclass
class MetricsRecord:
    k: int
    consensus_variance: float
    dist_sq: float | None = None
    accuracy: float | None = None


@dataclass
class MetricsLog:
    records: list[MetricsRecord] = field(default_factory=list)
    final_models: dict[int, np.ndarray] = field(default_factory=dict)
    wall_time: float = 0.0

    def to_csv(self, path=None) -> str:
        lines = [CSV_HEADER]
        for r in self.records:
            ds = "" if r.dist_sq is None else repr(r.dist_sq)
            ac = "" if r.accuracy is None else repr(r.accuracy)
            lines.append(f"{r.k},{r.consensus_variance!r},{ds},{ac}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals])

    def tail_mean(self, name: str, frac: float = 0.1) -> float:
        col = self.column(name)
        tail = col[int(np.floor(len(col) * (1 - frac))):]
        return float(np.nanmean(tail))


@dataclass
class ExperimentConfig:
    """Everything that determines a run. objectives maps agent index to its
    local cost; Byzantine agents need one only for sign-flip true models (or
    scenario wiring)."""

    schedule: NetworkSchedule
    objectives: dict[int, LocalObjective]
    algo: alg.AlgoConfig
    steps: alg.StepSchedule
    iterations: int
    attack: atk.AttackSpec = field(default_factory=atk.NoAttack)
    eval_every: int = 10
    seed: int = 0
    batch_size: int = 32
    init: float | np.ndarray = 0.0
    reference: np.ndarray | None = None
    eval_features: np.ndarray | None = None
    eval_labels: np.ndarray | None = None
    check_connectivity: bool = True

    def validate(self) -> None:
        topo = self.schedule.base
        for i in topo.regular:
            if i not in self.objectives:
                raise EngineError(f"regular agent {i} has no objective")
        if self.iterations < 1:
            raise EngineError("iterations must be >= 1")
        if self.eval_every < 1:
            raise EngineError("eval_every must be >= 1")
        if isinstance(self.attack, atk.SignFlip):
            for j in topo.byzantine:
                if j not in self.objectives:
                    raise EngineError(
                        f"sign-flip attacker {j} needs its own objective shard")


def _check_connectivity(schedule: NetworkSchedule) -> None:
    """Static: the regular subgraph itself must be connected. RandomActivation:
    the base regular subgraph (every base edge has positive frequency).
    Periodic: the union of frames restricted to regulars."""
    base = schedule.base
    if isinstance(schedule, Periodic):
        union = frozenset().union(*schedule.frames)
        probe = Topology(base.n, union, base.byzantine)
    else:
        probe = base
    if not regular_subgraph_connected(probe):
        kind = "average" if not schedule.is_static else "regular"
        raise EngineError(
            f"the {kind} network of regular agents is disconnected; "
            "pass check_connectivity=False to waive")


def _neighbor_maps(edges, regular_set, byz_set):
    reg_nb: dict[int, list[int]] = {}
    byz_nb: dict[int, list[int]] = {}
    for i, j in edges:
        for a, b in ((i, j), (j, i)):
            if b in byz_set:
                byz_nb.setdefault(a, []).append(b)
            else:
                reg_nb.setdefault(a, []).append(b)
    return reg_nb, byz_nb


def run(config: ExperimentConfig) -> MetricsLog:
    config.validate()
    if config.check_connectivity:
        _check_connectivity(config.schedule)

    t0 = time.perf_counter()
    topo = config.schedule.base
    regular = topo.regular
    regular_set = set(regular)
    byz_set = set(topo.byzantine)
    dims = {config.objectives[i].dim for i in regular}
    if len(dims) != 1:
        raise EngineError("all regular objectives must share a dimension")
    p = dims.pop()

    def initial() -> np.ndarray:
        if isinstance(config.init, np.ndarray):
            return config.init.astype(float).copy()
        return np.full(p, float(config.init))

    models = {i: initial() for i in regular}
    # Without an attack, Byzantine-labelled agents simply stay silent.
    attacking = not isinstance(config.attack, atk.NoAttack)
    sign_flip = isinstance(config.attack, atk.SignFlip)
    true_models = {j: initial() for j in byz_set} if sign_flip else {}

    rngs = {i: np.random.default_rng((config.seed, 100 + i))
            for i in list(regular) + (sorted(byz_set) if sign_flip else [])}

    copy_target = None
    if isinstance(config.attack, atk.CopyRegular):
        copy_target = atk.choose_copy_target(config.attack, regular)
    same_value_payload = (np.full(p, config.attack.c)
                          if isinstance(config.attack, atk.SameValue) else None)

    eval_obj = None
    eval_agent = None
    if config.eval_features is not None:
        for i in regular:
            if isinstance(config.objectives[i], SoftmaxObjective):
                eval_obj = config.objectives[i]
                break
        if eval_obj is None:
            raise EngineError("accuracy evaluation needs a softmax objective")
        eval_agent = int(np.random.default_rng((config.seed, 7)).choice(regular))

    static = config.schedule.is_static
    static_nb = _neighbor_maps(config.schedule.edges_at(0), regular_set, byz_set) \
        if static else None

    cfg_algo = config.algo

    def update(i, x, inbox, grad, alpha):
        if cfg_algo.method == alg.PROPOSED:
            return alg.proposed_step(x, inbox, grad, None, cfg_algo.lam, alpha,
                                     cfg_algo.norm)
        if cfg_algo.method == alg.DPSGD:
            return alg.dpsgd_step(x, inbox, grad, None, alpha)
        return alg.bridge_step(x, inbox, grad, None, alpha, cfg_algo.trim_b)

    def record(k, snapshot) -> MetricsRecord:
        vals = [snapshot[i] for i in regular]
        rec = MetricsRecord(k, consensus_variance(vals))
        if config.reference is not None:
            rec.dist_sq = dist_sq_to(vals, config.reference)
        if eval_obj is not None:
            rec.accuracy = eval_obj.accuracy(snapshot[eval_agent],
                                             config.eval_features,
                                             config.eval_labels)
        return rec

    log = MetricsLog()
    for k in range(config.iterations):
        if static:
            reg_nb, byz_nb = static_nb
        else:
            reg_nb, byz_nb = _neighbor_maps(config.schedule.edges_at(k),
                                            regular_set, byz_set)
        if k % config.eval_every == 0:
            log.records.append(record(k, models))

        alpha = config.steps.at(k)
        snapshot = models  # updates build fresh arrays; no in-place writes

        # Same-value / sign-flip / copy payloads are receiver-independent, so
        # craft them once per round per sender instead of per edge.
        round_payload: dict[int, np.ndarray] | None = None
        if isinstance(config.attack, atk.SameValue):
            round_payload = {j: same_value_payload for j in byz_set}
        elif isinstance(config.attack, atk.SignFlip):
            round_payload = {j: config.attack.gamma * true_models[j]
                             for j in byz_set}
        elif isinstance(config.attack, atk.CopyRegular):
            round_payload = {j: snapshot[copy_target] for j in byz_set}

        new_models = {}
        for i in regular:
            rn = reg_nb.get(i, ())
            bn = byz_nb.get(i, ()) if attacking else ()
            inbox = [snapshot[j] for j in rn]
            if bn:
                if round_payload is not None:
                    inbox.extend(round_payload[j] for j in bn)
                else:
                    for j in bn:
                        view = atk.OmniscientView(
                            regular_models=snapshot, receiver=i, sender=j,
                            receiver_regular_neighbors=tuple(rn),
                            n_byzantine_neighbors=len(bn), dim=p,
                            sender_true_model=true_models.get(j))
                        inbox.append(atk.craft_message(config.attack, view,
                                                       copy_target))
            grad = config.objectives[i].sample_gradient(snapshot[i], rngs[i],
                                                        config.batch_size)
            new_models[i] = update(i, snapshot[i], inbox, grad, alpha)

        if sign_flip:
            # Attackers keep an honest shadow model: the configured update
            # rule fed only by their regular neighbors' true models.
            new_true = {}
            for j in sorted(byz_set):
                rn = reg_nb.get(j, ())
                inbox = [snapshot[i] for i in rn if i in regular_set]
                grad = config.objectives[j].sample_gradient(true_models[j],
                                                            rngs[j],
                                                            config.batch_size)
                new_true[j] = update(j, true_models[j], inbox, grad, alpha)
            true_models = new_true

        models = new_models

    log.records.append(record(config.iterations, models))
    log.final_models = models
    log.wall_time = time.perf_counter() - t0
    return log


def write_manifest(path, config_echo: dict, seed: int, wall_time: float,
                   version: str = "byzrobust-0.1.0") -> None:
    payload = {"config": config_echo, "seed": seed,
               "wall_time_sec": wall_time, "version": version}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
