"""Undirected weighted graphs and their block-lifted linear operators.

Stacked variables are ndarrays with one row per block: node variables have
shape ``(nodes, n)``, edge variables ``(edges, n)``. A base matrix acting on
the row axis of such an array is equivalent to applying ``base kron I_n`` to
the flattened vector, so the Kronecker lift is never materialized.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

logger = logging.getLogger(__name__)

# Any upper bound on the top eigenvalue keeps the step-size caps valid, so the
# power-iteration output is inflated by a tiny relative margin.
EIG_SAFETY = 1e-8


def _is_connected(node_count, edges):
    if node_count == 1:
        return True
    adj = [[] for _ in range(node_count)]
    for h, t in edges:
        adj[h].append(t)
        adj[t].append(h)
    seen = bytearray(node_count)
    queue = deque([0])
    seen[0] = 1
    found = 1
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = 1
                found += 1
                queue.append(w)
    return found == node_count


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph with an explicit edge orientation.

    Parameters
    ----------
    node_count : int
        Number of nodes, labeled ``0 .. node_count - 1``.
    edges : sequence of (head, tail) pairs
        One pair per edge. The orientation is arbitrary but fixed; it only
        affects the signs of edge variables, never node dynamics.
    """

    node_count: int
    edges: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple((int(h), int(t)) for h, t in self.edges)
        )
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        seen = set()
        for h, t in self.edges:
            if h == t:
                raise ValueError(f"self-loop at node {h}")
            if not (0 <= h < self.node_count and 0 <= t < self.node_count):
                raise ValueError(f"edge ({h}, {t}) references unknown node")
            key = (min(h, t), max(h, t))
            if key in seen:
                raise ValueError(f"duplicate edge between {key[0]} and {key[1]}")
            seen.add(key)
        if not _is_connected(self.node_count, self.edges):
            raise ValueError("graph is not connected")

    @property
    def edge_count(self):
        return len(self.edges)


@dataclass(frozen=True)
class EdgeWeights:
    """Per-edge spring constants ``s`` and damper constants ``d``."""

    s: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.s, dtype=float))
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if s.shape != d.shape or s.ndim != 1:
            raise ValueError("s and d must be 1-d arrays of equal length")
        if s.size and (s.min() <= 0 or d.min() <= 0):
            raise ValueError("spring and damper constants must be strictly positive")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "d", d)

    @classmethod
    def uniform(cls, edge_count, s, d):
        return cls(np.full(edge_count, float(s)), np.full(edge_count, float(d)))


class BlockOperator:
    """Linear map on stacked arrays given by a base matrix on the row axis.

    ``op @ x`` with ``x`` of shape ``(cols, n)`` applies the base matrix to
    every coordinate slice at once and equals the Kronecker-lifted matrix
    acting on the flattened vector.
    """

    __slots__ = ("base",)

    def __init__(self, base):
        self.base = np.asarray(base, dtype=float)

    @property
    def shape(self):
        return self.base.shape

    @property
    def T(self):
        return BlockOperator(self.base.T)

    def __matmul__(self, x):
        return self.base @ np.asarray(x, dtype=float)

    def quad(self, x):
        """Quadratic form ``<op @ x, x>`` summed over all blocks."""
        x = np.asarray(x, dtype=float)
        return float(np.sum((self.base @ x) * x))


def incidence_matrix(g: Graph) -> np.ndarray:
    """Node-by-edge matrix with +1 at each head, -1 at each tail."""
    E = np.zeros((g.node_count, g.edge_count))
    for j, (h, t) in enumerate(g.edges):
        E[h, j] = 1.0
        E[t, j] = -1.0
    return E


def scaled_incidence(g: Graph, s) -> BlockOperator:
    """Incidence matrix with columns scaled by the square roots of ``s``.

    Maps edge variables to node variables; its transpose annihilates
    consensus (all node blocks equal) on a connected graph.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (g.edge_count,):
        raise ValueError("spring weights must have one entry per edge")
    if s.size and s.min() <= 0:
        raise ValueError("spring weights must be strictly positive")
    return BlockOperator(incidence_matrix(g) * np.sqrt(s))


def weighted_laplacian(g: Graph, w) -> BlockOperator:
    """Weighted graph Laplacian ``E diag(w) E^T`` as a block operator.

    Symmetric positive semidefinite; its quadratic form is the weighted sum
    of squared differences across edges, and consensus vectors span its
    null space on a connected graph.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape != (g.edge_count,):
        raise ValueError("weights must have one entry per edge")
    if w.size and w.min() <= 0:
        raise ValueError("weights must be strictly positive")
    E = incidence_matrix(g)
    return BlockOperator((E * w) @ E.T)


def largest_eigenvalue(op: BlockOperator, tol=1e-10, max_iter=100_000) -> float:
    """Largest eigenvalue of a symmetric PSD base matrix via power iteration.

    The result is inflated by a relative ``EIG_SAFETY`` margin: any upper
    bound keeps downstream step-size caps valid.

    Raises
    ------
    ConvergenceError
        If the residual test is not met within ``max_iter`` iterations.
    """
    A = op.base
    m = A.shape[0]
    if m == 0 or not np.any(A):
        return 0.0
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(m)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = A @ v
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            # v landed in the null space; reseed deterministically
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            continue
        lam = float(v @ y)
        v = y / norm_y
        residual = np.linalg.norm(A @ v - lam * v)
        if residual <= tol * max(1.0, abs(lam)):
            return lam * (1.0 + EIG_SAFETY)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        residual=float(np.linalg.norm(A @ v - lam * v)),
        iterations=max_iter,
    )


def max_step_ratio(s, d) -> float:
    """Largest ``a`` with ``a * s <= d`` elementwise, i.e. ``min(d / s)``.

    Together with the Laplacian's top eigenvalue this caps admissible step
    sizes for the discrete dynamics.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if s.shape != d.shape:
        raise ValueError("s and d must have equal length")
    if s.size == 0:
        return np.inf
    if s.min() <= 0 or d.min() <= 0:
        raise ValueError("weights must be strictly positive")
    return float(np.min(d / s))


def random_connected_graph(n_nodes, p, seed, max_retries=10_000) -> Graph:
    """Sample node pairs independently with probability ``p`` until connected.

    Deterministic given ``seed``; the edge orientation convention is
    head = lower node id. Disconnected draws are rejected and resampled.
    """
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    if not 0.0 < p <= 1.0:
        raise ValueError("edge probability must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    for attempt in range(1, max_retries + 1):
        draws = rng.random(len(pairs))
        edges = tuple(pair for pair, r in zip(pairs, draws) if r < p)
        if _is_connected(n_nodes, edges):
            if attempt > 1:
                logger.info("connected graph found after %d retries", attempt - 1)
            return Graph(n_nodes, edges)
    raise ConvergenceError(
        f"no connected graph in {max_retries} draws (n={n_nodes}, p={p})",
        iterations=max_retries,
    )


def save_graph(path, g: Graph, weights: EdgeWeights) -> None:
    """Write the edge-list text format: node count, then `head tail s d` lines."""
    if weights.s.shape != (g.edge_count,):
        raise ValueError("weights do not match the graph's edge count")
    lines = [str(g.node_count)]
    for (h, t), s, d in zip(g.edges, weights.s, weights.d):
        lines.append(f"{h} {t} {s:.17g} {d:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path):
    """Read the edge-list text format; returns ``(Graph, EdgeWeights)``."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValueError(f"{path}: empty graph file")
    node_count = int(raw[0])
    edges, ss, ds = [], [], []
    for ln in raw[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
        ss.append(float(parts[2]))
        ds.append(float(parts[3]))
    return Graph(node_count, tuple(edges)), EdgeWeights(np.array(ss), np.array(ds))
