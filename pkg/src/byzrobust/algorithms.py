"""One-round update rules and step-size schedules.

The proposed method penalizes disagreement with every received message via a
norm subgradient; the receiver never tries to classify senders, so Byzantine
payloads enter on the same footing as honest models but with influence capped
by the bounded subgradient. DPSGD (neighbor averaging) and the trimmed-mean
screen are the baselines.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

L1, L2, LINF = "l1", "l2", "linf"
PENALTY_NORMS = (L1, L2, LINF)


class SimulationError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


def sign_vec(d: np.ndarray) -> np.ndarray:
    """Element-wise sign with sign(0) = 0 (the symmetric subgradient choice)."""
    return np.sign(d)


def penalty_subgradient(norm: str, d: np.ndarray) -> np.ndarray:
    """A subgradient of ||.||_norm at d; zero vector at d = 0."""
    if norm == L1:
        return np.sign(d)
    if norm == L2:
        nrm = np.linalg.norm(d)
        return d / nrm if nrm > 0 else np.zeros_like(d)
    if norm == LINF:
        g = np.zeros_like(d)
        if np.any(d):
            m = int(np.argmax(np.abs(d)))  # first coordinate achieving the max
            g[m] = np.sign(d[m])
        return g
    raise ConfigError(f"unknown penalty norm {norm!r}")


def _penalty_sum(x_i: np.ndarray, messages, norm: str) -> np.ndarray:
    """Sum of penalty subgradients of x_i against each message."""
    if len(messages) == 0:
        return np.zeros_like(x_i)
    if norm == L1:
        if len(messages) >= 4:
            return np.sign(x_i - np.array(messages)).sum(axis=0)
        out = np.sign(x_i - messages[0])
        for m in messages[1:]:
            out += np.sign(x_i - m)
        return out
    if norm in (L2, LINF):
        out = np.zeros_like(x_i)
        for m in messages:
            out += penalty_subgradient(norm, x_i - m)
        return out
    raise ConfigError(f"unknown penalty norm {norm!r}")


def _as_matrix(x_i: np.ndarray, messages) -> np.ndarray:
    if isinstance(messages, np.ndarray) and messages.ndim == 2:
        return messages
    if len(messages) == 0:
        return np.empty((0, x_i.size))
    return np.stack(list(messages))


def proposed_step(x_i: np.ndarray, messages, grad_sample: np.ndarray,
                  grad_reg: np.ndarray | None, lam: float, alpha: float,
                  norm: str = L1) -> np.ndarray:
    """TV-penalty stochastic subgradient update over one round's inbox.

    messages: sequence of vectors (or an (m, p) array) from the round's
    neighbors, honest and Byzantine alike.
    """
    if alpha <= 0:
        raise ConfigError("step size must be positive")
    g = grad_sample + lam * _penalty_sum(x_i, messages, norm)
    if grad_reg is not None:
        g = g + grad_reg
    out = x_i - alpha * g
    # dot-with-self is non-finite iff any entry is (cheap NaN/Inf guard)
    if not np.isfinite(out @ out):
        raise SimulationError("non-finite model after proposed_step")
    return out


def dpsgd_step(x_i: np.ndarray, messages, grad_sample: np.ndarray,
               grad_reg: np.ndarray | None, alpha: float) -> np.ndarray:
    """Equal-neighbor-weights mixing followed by an SGD step."""
    if alpha <= 0:
        raise ConfigError("step size must be positive")
    msgs = _as_matrix(x_i, messages)
    mixed = (x_i + msgs.sum(axis=0)) / (1 + msgs.shape[0])
    g = grad_sample if grad_reg is None else grad_sample + grad_reg
    out = mixed - alpha * g
    if not np.isfinite(out @ out):
        raise SimulationError("non-finite model after dpsgd_step")
    return out


def trimmed_mean(values: np.ndarray, trim_b: int) -> np.ndarray:
    """Coordinate-wise mean after dropping the trim_b largest and smallest
    entries per coordinate. values: (m, p)."""
    m = values.shape[0]
    if trim_b == 0:
        return values.mean(axis=0)
    if m <= 2 * trim_b:
        raise ConfigError(f"need more than {2 * trim_b} values to trim, got {m}")
    s = np.sort(values, axis=0)
    return s[trim_b:m - trim_b].mean(axis=0)


def bridge_step(x_i: np.ndarray, messages, grad_sample: np.ndarray,
                grad_reg: np.ndarray | None, alpha: float, trim_b: int) -> np.ndarray:
    """Trimmed-mean screening of own value + inbox, then an SGD step.

    With too few messages to trim, falls back to the plain mean (warned).
    """
    if alpha <= 0:
        raise ConfigError("step size must be positive")
    msgs = _as_matrix(x_i, messages)
    stacked = np.vstack([x_i[None, :], msgs])
    if stacked.shape[0] <= 2 * trim_b:
        log.warning("bridge_step: only %d values for trim_b=%d; using plain mean",
                    stacked.shape[0], trim_b)
        mixed = stacked.mean(axis=0)
    else:
        mixed = trimmed_mean(stacked, trim_b)
    g = grad_sample if grad_reg is None else grad_sample + grad_reg
    out = mixed - alpha * g
    if not np.isfinite(out @ out):
        raise SimulationError("non-finite model after bridge_step")
    return out


@dataclass(frozen=True)
class TheoreticalSchedule:
    """alpha^k = min(alpha_low, alpha_high / (k+1))."""

    alpha_low: float
    alpha_high: float

    def __post_init__(self):
        if self.alpha_low <= 0 or self.alpha_high <= 0:
            raise ConfigError("schedule parameters must be positive")

    def at(self, k: int) -> float:
        return min(self.alpha_low, self.alpha_high / (k + 1))

    @property
    def k0(self) -> int:
        """Smallest k with alpha_low >= alpha_high / (k+1)."""
        return max(0, int(np.ceil(self.alpha_high / self.alpha_low)) - 1)


@dataclass(frozen=True)
class PracticalSchedule:
    """alpha^k = a / sqrt(k+1)."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigError("schedule parameter must be positive")

    def at(self, k: int) -> float:
        return self.a / np.sqrt(k + 1)


@dataclass(frozen=True)
class ConstantSchedule:
    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigError("schedule parameter must be positive")

    def at(self, k: int) -> float:
        return self.a


StepSchedule = TheoreticalSchedule | PracticalSchedule | ConstantSchedule

PROPOSED, DPSGD, BRIDGE_S = "proposed", "dpsgd", "bridge_s"


@dataclass(frozen=True)
class AlgoConfig:
    """Which update rule the regular agents run."""

    method: str = PROPOSED
    lam: float = 0.0                 # proposed only
    norm: str = L1                   # proposed only
    trim_b: int = 0                  # bridge_s only

    def __post_init__(self):
        if self.method not in (PROPOSED, DPSGD, BRIDGE_S):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.norm not in PENALTY_NORMS:
            raise ConfigError(f"unknown penalty norm {self.norm!r}")
        if self.trim_b < 0:
            raise ConfigError("trim_b must be >= 0")
