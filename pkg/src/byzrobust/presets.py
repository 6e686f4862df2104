"""Named experiment scenarios and the flat-config -> experiment builder.

A scenario is a flat key/value dict; presets fill in the published
hyperparameters as defaults and CLI flags override individual keys. Softmax
experiments fall back to a synthetic 10-class blob dataset when no IDX files
are available, so every preset runs without downloads.
"""

from __future__ import annotations

import os

import numpy as np

from . import attacks as atk
from .algorithms import (AlgoConfig, ConstantSchedule, ConfigError,
                         PracticalSchedule, TheoreticalSchedule)
from .engine import ExperimentConfig
from .graph import (RandomActivation, Static, Topology, assign_byzantine,
                    gen_erdos_renyi, regular_subgraph_connected)
from .objectives import (SoftmaxObjective, load_idx_images, load_idx_labels,
                         partition_iid, partition_per_digit_groups)

BASE_DEFAULTS = {
    "preset": "no_attack",
    "n": 30,
    "p_edge": 0.7,
    "graph_seed": 1,
    "b": 0,
    "seed": 0,
    "iters": 3000,
    "lam": 0.005,
    "step": 0.3,
    "step_kind": "practical",
    "method": "proposed",
    "norm": "l1",
    "trim_b": 0,
    "attack": "none",
    "attack_c": 100.0,
    "attack_gamma": -4.0,
    "pe": 0.0,                 # 0 means static
    "partition": "iid",
    "dataset": "auto",
    "data_dir": "",
    "n_train": 6000,
    "n_test": 1000,
    "feature_dim": 50,
    "batch": 32,
    "eval_every": 10,
}

# Published hyperparameters per scenario.
PRESETS: dict[str, dict] = {
    "no_attack": {"b": 0, "attack": "none", "lam": 0.005, "step": 0.3},
    "zero_sum": {"b": 3, "attack": "zero_sum", "lam": 0.001, "step": 0.9},
    "same_value": {"b": 3, "attack": "same_value", "attack_c": 100.0,
                   "lam": 0.01, "step": 0.28},
    "sign_flip": {"b": 3, "attack": "sign_flip", "attack_gamma": -4.0,
                  "lam": 0.0022, "step": 0.5},
    "lambda_sweep": {"b": 3, "attack": "same_value", "attack_c": 100.0,
                     "step": 0.28},
    "byz_fraction_sweep": {"attack": "zero_sum", "lam": 0.001, "step": 0.9},
    "norm_sweep": {"b": 3, "attack": "sign_flip", "attack_gamma": -4.0},
    "non_iid_copy": {"n": 30, "b": 6, "attack": "copy_regular",
                     "partition": "per_digit", "lam": 0.02, "step": 0.4},
    "time_varying_same_value": {"b": 3, "attack": "same_value",
                                "attack_c": 100.0, "pe": 0.01, "lam": 0.2,
                                "step": 0.5},
}

# Sweep points: (label, overrides).
SWEEPS: dict[str, list[tuple[str, dict]]] = {
    "lambda_sweep": [(f"lam_{v}", {"lam": v}) for v in (0.0, 0.001, 0.01, 0.1)],
    "byz_fraction_sweep": [(f"b_{v}", {"b": v}) for v in (0, 3, 6, 9, 12)],
    "norm_sweep": [("l1", {"norm": "l1", "lam": 0.0022, "step": 0.5}),
                   ("l2", {"norm": "l2", "lam": 0.2, "step": 0.4}),
                   ("linf", {"norm": "linf", "lam": 0.9, "step": 0.4})],
}

# Time-varying activation probabilities with their published parameters.
TIME_VARYING_PARAMS = {0.01: {"lam": 0.2, "step": 0.5},
                       0.005: {"lam": 0.4, "step": 0.5}}


def resolve(preset: str | None, overrides: dict) -> dict:
    """Expand a preset name plus overrides into a full flat config."""
    cfg = dict(BASE_DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; "
                              f"choose from {sorted(PRESETS)}")
        cfg["preset"] = preset
        cfg.update(PRESETS[preset])
    if preset == "time_varying_same_value" and "pe" in overrides:
        pe = float(overrides["pe"])
        cfg.update(TIME_VARYING_PARAMS.get(pe, {}))
    for key, val in overrides.items():
        if key not in cfg:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = type(BASE_DEFAULTS[key])(val) if key in BASE_DEFAULTS else val
    return cfg


def sweep_points(cfg: dict) -> list[tuple[str, dict]]:
    """(label, full config) per sweep point; a single point for non-sweeps."""
    preset = cfg["preset"]
    if preset not in SWEEPS:
        return [("run", cfg)]
    return [(label, {**cfg, **ov}) for label, ov in SWEEPS[preset]]


def synthetic_dataset(n_train: int, n_test: int, dim: int, n_classes: int = 10,
                      seed: int = 2024):
    """Gaussian blobs, one per class, linearly separable enough for softmax."""
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_classes, dim)) * 2.0
    def draw(n):
        labels = rng.integers(0, n_classes, size=n)
        feats = means[labels] + rng.standard_normal((n, dim))
        return feats, labels
    train = draw(n_train)
    test = draw(n_test)
    return train[0], train[1], test[0], test[1]


MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def load_dataset(cfg: dict):
    data_dir = cfg.get("data_dir", "")
    kind = cfg.get("dataset", "auto")
    have_idx = data_dir and all(
        os.path.exists(os.path.join(data_dir, f)) for f in MNIST_FILES.values())
    if kind == "mnist" and not have_idx:
        raise ConfigError(f"dataset=mnist but IDX files not found in {data_dir!r}")
    if kind == "mnist" or (kind == "auto" and have_idx):
        tr_x = load_idx_images(os.path.join(data_dir, MNIST_FILES["train_images"]))
        tr_y = load_idx_labels(os.path.join(data_dir, MNIST_FILES["train_labels"]))
        te_x = load_idx_images(os.path.join(data_dir, MNIST_FILES["test_images"]))
        te_y = load_idx_labels(os.path.join(data_dir, MNIST_FILES["test_labels"]))
        n_tr = min(int(cfg["n_train"]), tr_x.shape[0])
        return tr_x[:n_tr], tr_y[:n_tr], te_x[:int(cfg["n_test"])], te_y[:int(cfg["n_test"])]
    return synthetic_dataset(int(cfg["n_train"]), int(cfg["n_test"]),
                             int(cfg["feature_dim"]))


def build_topology(cfg: dict) -> Topology:
    n, b = int(cfg["n"]), int(cfg["b"])
    gseed = int(cfg["graph_seed"])
    if cfg["partition"] == "per_digit":
        # Attackers hold the shards of the last two digit groups; keep
        # resampling the graph until the remaining agents stay connected.
        byz = frozenset(range(n - b, n)) if b else frozenset()
        for off in range(100):
            topo = gen_erdos_renyi(n, float(cfg["p_edge"]), gseed + off).with_byzantine(byz)
            if regular_subgraph_connected(topo):
                return topo
        raise ConfigError("could not generate a connected per-digit topology")
    topo = gen_erdos_renyi(n, float(cfg["p_edge"]), gseed)
    return assign_byzantine(topo, b, gseed + 1)


def build_experiment(cfg: dict) -> ExperimentConfig:
    topo = build_topology(cfg)
    n = topo.n

    pe = float(cfg["pe"])
    if pe and pe < 1.0:
        schedule = RandomActivation(topo, pe, seed=int(cfg["graph_seed"]) + 2)
    else:
        schedule = Static(topo)

    tr_x, tr_y, te_x, te_y = load_dataset(cfg)
    n_classes = int(tr_y.max()) + 1
    if cfg["partition"] == "per_digit":
        shards = partition_per_digit_groups(tr_y, n, n_classes)
    else:
        shards = partition_iid(tr_x.shape[0], n, int(cfg["seed"]))
    objectives = {
        i: SoftmaxObjective(tr_x[shards[i]], tr_y[shards[i]], n_classes)
        for i in range(n)
    }

    attack_name = cfg["attack"]
    if attack_name == "none":
        attack = atk.NoAttack()
    elif attack_name == "zero_sum":
        attack = atk.ZeroSum()
    elif attack_name == "same_value":
        attack = atk.SameValue(float(cfg["attack_c"]))
    elif attack_name == "sign_flip":
        attack = atk.SignFlip(float(cfg["attack_gamma"]))
    elif attack_name == "copy_regular":
        attack = atk.CopyRegular(int(cfg["seed"]) + 11)
    else:
        raise ConfigError(f"unknown attack {attack_name!r}")

    kind = cfg["step_kind"]
    if kind == "practical":
        steps = PracticalSchedule(float(cfg["step"]))
    elif kind == "constant":
        steps = ConstantSchedule(float(cfg["step"]))
    elif kind == "theoretical":
        raise ConfigError("theoretical schedule needs declared curvature "
                          "constants; use the quadratic harness instead")
    else:
        raise ConfigError(f"unknown step_kind {kind!r}")

    algo = AlgoConfig(method=cfg["method"], lam=float(cfg["lam"]),
                      norm=cfg["norm"],
                      trim_b=int(cfg["trim_b"]) or int(cfg["b"]))

    return ExperimentConfig(
        schedule=schedule, objectives=objectives, algo=algo, steps=steps,
        iterations=int(cfg["iters"]), attack=attack,
        eval_every=int(cfg["eval_every"]), seed=int(cfg["seed"]),
        batch_size=int(cfg["batch"]), eval_features=te_x, eval_labels=te_y,
    )
