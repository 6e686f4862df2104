"""Byzantine message crafting.

Attackers are omniscient: every crafted payload may read the full snapshot of
all regular models at the start of the round. Payloads only replace what the
attacker transmits; they never touch the receiver's own computation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AttackError(RuntimeError):
    pass


@dataclass(frozen=True)
class OmniscientView:
    """Read-only round-k snapshot handed to an attacker.

    regular_models maps every regular agent to its current model;
    receiver_regular_neighbors / n_byzantine_neighbors describe the receiver's
    round-k neighborhood.
    """

    regular_models: dict[int, np.ndarray]
    receiver: int
    sender: int
    receiver_regular_neighbors: tuple[int, ...]
    n_byzantine_neighbors: int
    dim: int
    sender_true_model: np.ndarray | None = None   # sign-flip bookkeeping


@dataclass(frozen=True)
class NoAttack:
    name: str = field(default="none", init=False)


@dataclass(frozen=True)
class ZeroSum:
    """Cancel the receiver's honest inbox: each Byzantine neighbor sends
    -(sum of the receiver's regular-neighbor models) / (#Byzantine neighbors),
    so all round-k messages of the receiver sum to zero."""

    name: str = field(default="zero_sum", init=False)


@dataclass(frozen=True)
class SameValue:
    """Send the constant vector c * 1 to every neighbor."""

    c: float = 100.0
    name: str = field(default="same_value", init=False)

    def __post_init__(self):
        if not np.isfinite(self.c):
            raise AttackError("same-value constant must be finite")


@dataclass(frozen=True)
class SignFlip:
    """Maintain a true model by running the honest update rule on the
    attacker's own shard, then transmit gamma times it (gamma < 0)."""

    gamma: float = -4.0
    name: str = field(default="sign_flip", init=False)

    def __post_init__(self):
        if self.gamma >= 0:
            raise AttackError("sign-flip gamma must be negative")


@dataclass(frozen=True)
class CopyRegular:
    """Relay the model of one regular agent, chosen uniformly at setup and
    fixed for the whole run."""

    seed: int = 0
    name: str = field(default="copy_regular", init=False)


AttackSpec = NoAttack | ZeroSum | SameValue | SignFlip | CopyRegular


def choose_copy_target(spec: CopyRegular, regular_agents: list[int]) -> int:
    rng = np.random.default_rng(spec.seed)
    return int(rng.choice(regular_agents))


def craft_message(spec: AttackSpec, view: OmniscientView,
                  copy_target: int | None = None) -> np.ndarray:
    """Payload the Byzantine sender transmits to the receiver this round."""
    if isinstance(spec, ZeroSum):
        if view.n_byzantine_neighbors == 0:
            raise AttackError("zero-sum payload requested for a receiver with "
                              "no Byzantine neighbors")
        total = np.zeros(view.dim)
        for l in view.receiver_regular_neighbors:
            total += view.regular_models[l]
        return -total / view.n_byzantine_neighbors
    if isinstance(spec, SameValue):
        return np.full(view.dim, spec.c)
    if isinstance(spec, SignFlip):
        if view.sender_true_model is None:
            raise AttackError("sign-flip attacker has no true model in the view")
        return spec.gamma * view.sender_true_model
    if isinstance(spec, CopyRegular):
        if copy_target is None:
            raise AttackError("copy attack needs the setup-time target agent")
        return view.regular_models[copy_target].copy()
    raise AttackError(f"craft_message called for non-attacking spec {spec!r}")
