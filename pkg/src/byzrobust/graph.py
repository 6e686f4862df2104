"""Network topologies, time-varying edge schedules, and incidence matrices.

A topology is a set of undirected edges over agents 0..n-1, a subset of which
are labelled Byzantine. All spectral quantities (incidence matrix, minimum
nonzero singular value) are taken over the regular subgraph only.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

Edge = tuple[int, int]

# Numerical rank cutoff: singular values below RANK_TOL * sigma_max count as zero.
RANK_TOL = 1e-10

MAX_BYZANTINE_RETRIES = 10_000


class GraphError(ValueError):
    pass


def _check_edge(e: Edge, n: int) -> None:
    i, j = e
    if not (0 <= i < j < n):
        raise GraphError(f"bad edge {e!r} for n={n} (need 0 <= i < j < n)")


@dataclass(frozen=True)
class Topology:
    """Static undirected graph with Byzantine labels.

    Edges are stored as (i, j) pairs with i < j; no self-loops or duplicates.
    """

    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)
    byzantine: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("n must be >= 1")
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "byzantine", frozenset(self.byzantine))
        for e in self.edges:
            _check_edge(e, self.n)
        for i in self.byzantine:
            if not 0 <= i < self.n:
                raise GraphError(f"Byzantine index {i} out of range")
        if len(self.byzantine) >= self.n:
            raise GraphError("at least one regular agent is required")

    @property
    def regular(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.byzantine]

    @property
    def regular_edges(self) -> frozenset[Edge]:
        """Edges with no Byzantine endpoint."""
        b = self.byzantine
        return frozenset(e for e in self.edges if e[0] not in b and e[1] not in b)

    def neighbors(self, i: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def regular_neighbors(self, i: int) -> set[int]:
        return {j for j in self.neighbors(i) if j not in self.byzantine}

    def byzantine_neighbors(self, i: int) -> set[int]:
        return {j for j in self.neighbors(i) if j in self.byzantine}

    def with_byzantine(self, byzantine) -> "Topology":
        return Topology(self.n, self.edges, frozenset(byzantine))

    def save(self, path) -> None:
        """Plain-text edge list: "n b", one "i j" line per edge, then the
        Byzantine indices on a final line (possibly empty)."""
        lines = [f"{self.n} {len(self.byzantine)}"]
        lines += [f"{i} {j}" for i, j in sorted(self.edges)]
        lines.append(" ".join(str(i) for i in sorted(self.byzantine)))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Topology":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
        header = lines[0].split()
        n, b = int(header[0]), int(header[1])
        body = [ln for ln in lines[1:] if ln]
        byz_line = ""
        edge_lines = body
        if b > 0:
            byz_line, edge_lines = body[-1], body[:-1]
        edges = frozenset(tuple(sorted(map(int, ln.split()))) for ln in edge_lines)
        byz = frozenset(map(int, byz_line.split())) if byz_line else frozenset()
        if len(byz) != b:
            raise GraphError(f"header declares {b} Byzantine agents, file lists {len(byz)}")
        return cls(n, edges, byz)


def gen_erdos_renyi(n: int, p_edge: float, seed: int) -> Topology:
    """Erdos-Renyi G(n, p): each unordered pair kept independently with
    probability p_edge. Deterministic given seed; no Byzantine labels."""
    if n < 1:
        raise GraphError("n must be >= 1")
    if not 0.0 <= p_edge <= 1.0:
        raise GraphError("p_edge must be in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_edge:
                edges.add((i, j))
    return Topology(n, frozenset(edges))


def regular_subgraph_connected(t: Topology) -> bool:
    """True iff the regular agents are connected using only edges that avoid
    Byzantine endpoints. A single regular agent counts as connected."""
    regular = t.regular
    if len(regular) <= 1:
        return True
    adj: dict[int, set[int]] = {i: set() for i in regular}
    for i, j in t.regular_edges:
        adj[i].add(j)
        adj[j].add(i)
    seen = {regular[0]}
    queue = deque([regular[0]])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == len(regular)


def assign_byzantine(t: Topology, b: int, seed: int,
                     require_regular_connected: bool = True) -> Topology:
    """Mark exactly b agents Byzantine, chosen uniformly. With the flag set,
    resamples until the regular subgraph is connected (bounded retries)."""
    if b >= t.n:
        raise GraphError("b must be < n")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_BYZANTINE_RETRIES):
        byz = frozenset(rng.choice(t.n, size=b, replace=False).tolist()) if b else frozenset()
        cand = t.with_byzantine(byz)
        if not require_regular_connected or regular_subgraph_connected(cand):
            return cand
    raise GraphError(
        f"no Byzantine assignment with connected regular subgraph found in "
        f"{MAX_BYZANTINE_RETRIES} attempts; topology likely too sparse"
    )


class NetworkSchedule:
    """Edge process over rounds. edges_at(k) is pure: same (schedule, k) gives
    the same edge set."""

    base: Topology

    def edges_at(self, k: int) -> frozenset[Edge]:
        raise NotImplementedError

    def average_edge_frequencies(self) -> dict[Edge, float]:
        """Closed-form long-run appearance frequency per edge."""
        raise NotImplementedError

    @property
    def is_static(self) -> bool:
        return False


@dataclass(frozen=True)
class Static(NetworkSchedule):
    base: Topology

    def edges_at(self, k: int) -> frozenset[Edge]:
        return self.base.edges

    def average_edge_frequencies(self) -> dict[Edge, float]:
        return {e: 1.0 for e in self.base.edges}

    @property
    def is_static(self) -> bool:
        return True


@dataclass(frozen=True)
class RandomActivation(NetworkSchedule):
    """Each base edge is independently active with probability p_e per round.

    Draws are keyed on (seed, k) so edges_at is reproducible without history.
    """

    base: Topology
    prob: dict[Edge, float] | float
    seed: int = 0

    def __post_init__(self):
        for e, p in self._probs().items():
            if not 0.0 < p <= 1.0:
                raise GraphError(f"activation probability for {e} must be in (0, 1], got {p}")

    def _probs(self) -> dict[Edge, float]:
        if isinstance(self.prob, dict):
            return dict(self.prob)
        return {e: float(self.prob) for e in self.base.edges}

    def edges_at(self, k: int) -> frozenset[Edge]:
        if k < 0:
            raise GraphError("k must be >= 0")
        probs = self._probs()
        order = sorted(probs)
        rng = np.random.default_rng((self.seed, k))
        u = rng.random(len(order))
        return frozenset(e for e, ue in zip(order, u) if ue < probs[e])

    def average_edge_frequencies(self) -> dict[Edge, float]:
        return self._probs()

    def empirical_frequencies(self, horizon: int) -> dict[Edge, float]:
        """Sampled average activation over rounds 0..horizon-1 (testing aid)."""
        counts = {e: 0 for e in self.base.edges}
        for k in range(horizon):
            for e in self.edges_at(k):
                counts[e] += 1
        return {e: c / horizon for e, c in counts.items()}


@dataclass(frozen=True)
class Periodic(NetworkSchedule):
    """Cycles through a fixed list of frames; round k uses frames[k mod T]."""

    base: Topology
    frames: tuple[frozenset[Edge], ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(frozenset(f) for f in self.frames))
        if len(self.frames) < 1:
            raise GraphError("Periodic schedule needs at least one frame")
        for f in self.frames:
            if not f <= self.base.edges:
                raise GraphError("frame edges must be a subset of the candidate edges")

    @property
    def period(self) -> int:
        return len(self.frames)

    def edges_at(self, k: int) -> frozenset[Edge]:
        if k < 0:
            raise GraphError("k must be >= 0")
        return self.frames[k % self.period]

    def average_edge_frequencies(self) -> dict[Edge, float]:
        T = self.period
        return {e: sum(e in f for f in self.frames) / T for e in self.base.edges}


@dataclass(frozen=True)
class IncidenceMatrix:
    """Signed node-edge incidence matrix over the regular subgraph.

    Column for edge (i, j), i < j: +w at i's row, -w at j's row (w = 1
    unweighted, w = average frequency when weighted). Columns sum to zero.
    """

    matrix: np.ndarray
    row_agents: tuple[int, ...]
    edge_order: tuple[Edge, ...]


def incidence_matrix(t: Topology, weights: dict[Edge, float] | None = None) -> IncidenceMatrix:
    regular = t.regular
    row_of = {a: r for r, a in enumerate(regular)}
    if weights is None:
        cols = sorted(t.regular_edges)
        w = {e: 1.0 for e in cols}
    else:
        cols = sorted(e for e in t.regular_edges if weights.get(e, 0.0) > 0.0)
        w = weights
    m = np.zeros((len(regular), len(cols)))
    for c, (i, j) in enumerate(cols):
        m[row_of[i], c] = w[(i, j)]
        m[row_of[j], c] = -w[(i, j)]
    return IncidenceMatrix(m, tuple(regular), tuple(cols))


def min_nonzero_singular_value(m: IncidenceMatrix | np.ndarray) -> float:
    mat = m.matrix if isinstance(m, IncidenceMatrix) else np.asarray(m, dtype=float)
    if mat.size == 0 or not np.any(mat):
        raise GraphError("incidence matrix is all-zero; no nonzero singular value")
    s = np.linalg.svd(mat, compute_uv=False)
    nonzero = s[s > RANK_TOL * s[0]]
    if nonzero.size == 0:
        raise GraphError("no singular value above the rank tolerance")
    return float(nonzero[-1])
