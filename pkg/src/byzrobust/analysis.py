"""Theory layer: consensus thresholds, convergence-neighborhood constants,
an exact penalized-problem solver for small quadratic instances, and the
least-squares sign certificate behind the threshold result."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import cvxpy as cp
import numpy as np

from .engine import MetricsLog
from .graph import (Edge, IncidenceMatrix, Topology, incidence_matrix,
                    min_nonzero_singular_value, regular_subgraph_connected)
from .objectives import LocalObjective, QuadraticObjective, global_optimum


class AnalysisError(ValueError):
    pass


def lambda_zero(t: Topology, objectives: Sequence[LocalObjective],
                x_ref: np.ndarray,
                weights: dict[Edge, float] | None = None) -> float:
    """Critical penalty weight above which the penalized problem's minimizer
    is the consensual Byzantine-free optimum.

    x_ref must be that optimum; pass average-frequency weights for a
    time-varying schedule.
    """
    if not regular_subgraph_connected(t):
        raise AnalysisError("regular subgraph must be connected")
    A = incidence_matrix(t, weights)
    sig = min_nonzero_singular_value(A)
    grads_inf = max(float(np.max(np.abs(o.full_gradient(x_ref)))) for o in objectives)
    n_reg = len(t.regular)
    return np.sqrt(n_reg) / sig * grads_inf


@dataclass(frozen=True)
class TheoryBundle:
    """Closed-form constants of the step-size rule and neighborhood bounds.

    d1 and d5 are runtime-dependent (they contain the expected squared error
    at round k0) and are deliberately not included.
    """

    lam: float
    eps: float
    eta: float
    alpha_low: float
    alpha_high: float
    k0: int
    d0: float
    d2: float
    d4: float
    d6: float


def default_eps(objectives: Sequence[LocalObjective]) -> float:
    """Half of min_i 2 u_i L_i / (u_i + L_i): splits the curvature slack evenly."""
    return 0.5 * min(2 * o.strong_convexity * o.lipschitz /
                     (o.strong_convexity + o.lipschitz) for o in objectives)


def theory_constants(objectives: dict[int, LocalObjective], t: Topology,
                     lam: float, eps: float, alpha_high: float,
                     p: int) -> TheoryBundle:
    """Evaluate the printed constants for a quadratic-style instance whose
    objectives declare strong-convexity, Lipschitz, and variance constants.

    The time-varying constants (d4, d6) use each regular agent's
    all-possible-neighbor sets, i.e. the base-topology neighborhoods.
    """
    regular = t.regular
    objs = [objectives[i] for i in regular]
    eta = min(2 * o.strong_convexity * o.lipschitz /
              (o.strong_convexity + o.lipschitz) for o in objs) - eps
    if eta <= 0:
        raise AnalysisError("eps too large: eta must be positive")
    if alpha_high <= 1 / eta:
        raise AnalysisError("alpha_high must exceed 1/eta")
    alpha_low = min(1 / (4 * (o.strong_convexity + o.lipschitz)) for o in objs)
    k0 = max(0, int(np.ceil(alpha_high / alpha_low)) - 1)

    d0 = d2 = d6 = 0.0
    for i, o in zip(regular, objs):
        nr = len(t.regular_neighbors(i))
        nb = len(t.byzantine_neighbors(i))
        delta2 = o.grad_variance_bound
        d0 += 32 * lam**2 * nr**2 * p + 4 * lam**2 * nb**2 * p + 2 * delta2
        d2 += lam**2 * nb**2 * p / eps
        d6 += 2 * lam**2 * nb**2 * p / eps + 8 * lam**2 * nr**2 * p / eps
    d4 = d0
    return TheoryBundle(lam=lam, eps=eps, eta=eta, alpha_low=alpha_low,
                        alpha_high=alpha_high, k0=k0, d0=d0, d2=d2, d4=d4, d6=d6)


def solve_penalized_exact(quads: dict[int, QuadraticObjective] | Sequence[QuadraticObjective],
                          t: Topology, lam: float, norm: str = "l1",
                          weights: dict[Edge, float] | None = None) -> np.ndarray:
    """Exact minimizer of the penalized problem over the regular agents:
    sum_i (c_i/2)||x_i - b_i||^2 + lam * sum_edges w_e ||x_i - x_j||_norm.

    Solved as a convex program; returns an (|regular|, p) stack. This is the
    reference oracle the stochastic runs are compared against.
    """
    if lam > 0 and not regular_subgraph_connected(t):
        raise AnalysisError("regular subgraph must be connected")
    regular = t.regular
    if isinstance(quads, dict):
        objs = [quads[i] for i in regular]
    else:
        objs = list(quads)
    if len(objs) != len(regular):
        raise AnalysisError("need one quadratic objective per regular agent")
    p = objs[0].dim
    row_of = {a: r for r, a in enumerate(regular)}

    X = cp.Variable((len(regular), p))
    cost = 0
    for r, o in enumerate(objs):
        cost = cost + o.curvature / 2 * cp.sum_squares(X[r] - o.target)
    norm_fn = {"l1": lambda d: cp.norm1(d),
               "l2": lambda d: cp.norm2(d),
               "linf": lambda d: cp.norm_inf(d)}[norm]
    for (i, j) in sorted(t.regular_edges):
        w = 1.0 if weights is None else weights.get((i, j), 0.0)
        if w > 0 and lam > 0:
            cost = cost + lam * w * norm_fn(X[row_of[i]] - X[row_of[j]])
    prob = cp.Problem(cp.Minimize(cost))
    prob.solve(solver=cp.CLARABEL)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise AnalysisError(f"penalized solve failed with status {prob.status}")
    return np.atleast_2d(np.asarray(X.value, dtype=float))


def sign_certificate(t: Topology, v: np.ndarray, lam: float,
                     sum_tol: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Least-squares edge certificate for consensus optimality.

    v is the (|regular|, p) stack of full gradients at the consensual optimum;
    its per-coordinate agent sums must vanish. Returns (s, valid) where s is
    the (|edges|, p) certificate and valid means max|s| <= 1, which must hold
    whenever lam is at or above the consensus threshold.
    """
    if lam <= 0:
        raise AnalysisError("lam must be positive")
    if not regular_subgraph_connected(t):
        raise AnalysisError("regular subgraph must be connected")
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if v.shape[0] != len(t.regular):
        raise AnalysisError("one gradient row per regular agent is required")
    col_sums = v.sum(axis=0)
    if np.max(np.abs(col_sums)) > sum_tol * max(1.0, np.max(np.abs(v))):
        raise AnalysisError("gradient stack does not sum to zero: the reference "
                            "point is not the pooled optimum")
    A = incidence_matrix(t).matrix
    s_prime = -np.linalg.pinv(A) @ v          # (|edges|, p), per coordinate
    s = s_prime / lam
    valid = bool(np.max(np.abs(s)) <= 1.0 + 1e-9) if s.size else True
    return s, valid


@dataclass
class NeighborhoodReport:
    bound: float
    empirical_mean: float
    std_error: float
    slack: float
    n_seeds: int
    tail_frac: float
    passed: bool

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def verify_neighborhood(logs: Sequence[MetricsLog], bundle: TheoryBundle,
                        alpha_high: float, tail_frac: float = 0.1,
                        slack_std_errors: float = 3.0) -> NeighborhoodReport:
    """Check the plateau bound: the tail-averaged squared distance to the
    penalized optimum, averaged over seeds, should not exceed
    alpha_high * d2 plus a Monte-Carlo slack."""
    per_seed = np.array([log.tail_mean("dist_sq", tail_frac) for log in logs])
    mean = float(per_seed.mean())
    se = float(per_seed.std(ddof=1) / np.sqrt(len(per_seed))) if len(per_seed) > 1 else 0.0
    bound = float(alpha_high * bundle.d2)
    slack = float(slack_std_errors * se)
    return NeighborhoodReport(bound=bound, empirical_mean=mean, std_error=se,
                              slack=slack, n_seeds=len(per_seed),
                              tail_frac=tail_frac,
                              passed=bool(mean <= bound + slack))
