"""Comparison algorithms sharing the instance and metric interfaces.

All three mix iterates through a doubly stochastic matrix built from the
unweighted graph Laplacian and evaluate subgradients at the local,
pre-mix iterate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Simplex, simplex_projection
from .graphs import Graph, incidence_matrix
from .problems import ProblemInstance

_STOCH_TOL = 1e-12


@dataclass(frozen=True)
class StochasticMatrix:
    """Symmetric doubly stochastic mixing matrix."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        object.__setattr__(self, "P", P)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("mixing matrix must be square")
        if np.min(P) < -_STOCH_TOL:
            raise ValueError("mixing matrix must be entrywise nonnegative")
        ones = np.ones(P.shape[0])
        if np.max(np.abs(P @ ones - ones)) > _STOCH_TOL:
            raise ValueError("rows must sum to one")
        if np.max(np.abs(P.T @ ones - ones)) > _STOCH_TOL:
            raise ValueError("columns must sum to one")
        if np.max(np.abs(P - P.T)) > _STOCH_TOL:
            raise ValueError("mixing matrix must be symmetric")


def mixing_matrix(g: Graph) -> StochasticMatrix:
    """``I - L / (2 + 2*max_degree)`` with the unweighted Laplacian ``L``.

    Doubly stochastic with a strictly positive diagonal on any connected
    graph, so repeated mixing contracts toward consensus.
    """
    E = incidence_matrix(g)
    L = E @ E.T
    delta = float(np.max(np.diag(L)))
    P = np.eye(g.node_count) - L / (2.0 + 2.0 * delta)
    return StochasticMatrix(P)


def projected_subgradient_step(p: ProblemInstance, mix: StochasticMatrix, x, alpha):
    """Mix with neighbors, take a subgradient step, project back."""
    g = p.subgradients(x)
    y = mix.P @ np.asarray(x, dtype=float) - alpha * g
    if isinstance(p.mirror.domain, Simplex):
        return simplex_projection(y)
    return y


def mirror_descent_step(p: ProblemInstance, mix: StochasticMatrix, x, alpha):
    """Mix with neighbors in the primal, then take one mirror step."""
    g = p.subgradients(x)
    y = mix.P @ np.asarray(x, dtype=float)
    return p.mirror.mirror_step(y, alpha * g)


def dual_averaging_step(p: ProblemInstance, mix: StochasticMatrix, z, x, alpha):
    """Mix accumulated subgradients, then map back through the potential.

    Returns ``(z_next, x_next)``; the primal point minimizes
    ``<z_next, y> + potential(y) / alpha`` over the node domain, which is a
    normalized exponential on the simplex under the entropy potential.
    """
    g = p.subgradients(x)
    z_new = mix.P @ np.asarray(z, dtype=float) + g
    if isinstance(p.mirror.domain, Simplex):
        from .geometry import EntropyMap

        if isinstance(p.mirror, EntropyMap):
            e = -alpha * z_new
            e -= np.max(e, axis=-1, keepdims=True)
            y = np.exp(e)
            x_new = y / np.sum(y, axis=-1, keepdims=True)
        else:
            x_new = simplex_projection(-alpha * z_new)
    else:
        x_new = -alpha * z_new
    return z_new, x_new
