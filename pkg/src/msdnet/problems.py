"""Problem instances, optimality certificates, and the energy bookkeeping.

An instance couples a connected weighted graph with one convex cost per
node and a mirror geometry on the shared node domain. The certificate
(consensus optimum, minimum-norm edge multiplier, subgradient bound) is
what every convergence-bound evaluation downstream consumes.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CertificateError, DomainError
from .geometry import EuclideanMap, FreeSpace, Simplex, simplex_projection
from .graphs import (
    EdgeWeights,
    Graph,
    largest_eigenvalue,
    max_step_ratio,
    scaled_incidence,
    weighted_laplacian,
)

logger = logging.getLogger(__name__)

CERT_TOL = 1e-8
_SUPPORT_TOL = 1e-9


class Linear:
    """Cost ``<a, x>``; its subgradient is constant."""

    kind = "linear"
    mu = 0.0

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)

    def value(self, x):
        return float(np.dot(self.a, x))

    def subgrad(self, x):
        return self.a


class Quadratic:
    """Cost ``mu/2 * ||x - b||^2`` with strong-convexity modulus ``mu > 0``."""

    kind = "quadratic"

    def __init__(self, mu, b):
        if mu <= 0:
            raise ValueError("quadratic costs need mu > 0")
        self.mu = float(mu)
        self.b = np.asarray(b, dtype=float)

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.b
        return 0.5 * self.mu * float(np.dot(d, d))

    def subgrad(self, x):
        return self.mu * (np.asarray(x, dtype=float) - self.b)


class Custom:
    """Cost given by value and subgradient oracles.

    The subgradient oracle is treated as a gradient by the centralized
    solver, so differentiability is required there.
    """

    kind = "custom"

    def __init__(self, value, subgrad, mu=0.0):
        self._value = value
        self._subgrad = subgrad
        self.mu = float(mu)

    def value(self, x):
        return float(self._value(np.asarray(x, dtype=float)))

    def subgrad(self, x):
        return np.asarray(self._subgrad(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class ProblemInstance:
    """A distributed instance: graph, edge weights, node costs, geometry."""

    graph: Graph
    weights: EdgeWeights
    costs: tuple
    mirror: object
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if len(self.costs) != self.graph.node_count:
            raise ValueError("need exactly one cost per node")
        if self.weights.s.shape != (self.graph.edge_count,):
            raise ValueError("edge weights do not match the graph")
        if self.mirror.domain.dim != self.dim:
            raise ValueError("mirror map dimension does not match the instance")

    @cached_property
    def spring_incidence(self):
        return scaled_incidence(self.graph, self.weights.s)

    @cached_property
    def damper_laplacian(self):
        return weighted_laplacian(self.graph, self.weights.d)

    @cached_property
    def top_eigenvalue(self):
        return largest_eigenvalue(self.damper_laplacian)

    @cached_property
    def step_ratio(self):
        return max_step_ratio(self.weights.s, self.weights.d)

    @cached_property
    def explicit_step_cap(self):
        lam = self.top_eigenvalue
        return min(0.5 / lam if lam > 0 else np.inf, self.step_ratio)

    @cached_property
    def implicit_step_cap(self):
        lam = self.top_eigenvalue
        return min(1.0 / lam if lam > 0 else np.inf, 0.5 * self.step_ratio)

    def cost_value(self, x):
        return float(sum(c.value(xi) for c, xi in zip(self.costs, x)))

    def subgradients(self, x):
        return np.stack([c.subgrad(xi) for c, xi in zip(self.costs, x)])

    def feasible(self, x, tol=1e-9):
        return self.mirror.domain.contains(x, tol)


@dataclass(frozen=True)
class Certificate:
    """Consensus optimum with its stationarity data.

    ``grad_bound`` bounds ``||g + coupling(u_star)||_2`` over every
    subgradient at every feasible point; it is exact for linear costs and
    for quadratic costs on the simplex, and a sampled estimate otherwise
    (``grad_bound_exact`` records which).
    """

    x_star: np.ndarray
    u_star: np.ndarray
    g_star: np.ndarray
    grad_bound: float
    grad_bound_exact: bool
    residual: float


def centralized_optimum(p: ProblemInstance) -> np.ndarray:
    """Consensus optimum of the aggregated cost over the node domain.

    Closed forms cover all-linear costs on the simplex and all-quadratic
    costs on either domain; a backtracking projected-gradient solver covers
    remaining differentiable mixes. Returns a stacked consensus point.
    """
    kinds = {c.kind for c in p.costs}
    simplex = isinstance(p.mirror.domain, Simplex)
    if kinds == {"linear"}:
        if not simplex:
            raise ValueError("linear costs on free space have no bounded optimum")
        total = np.sum([c.a for c in p.costs], axis=0)
        j = int(np.argmin(total))
        ties = np.flatnonzero(total <= total[j] + 1e-12)
        if ties.size > 1:
            warnings.warn(
                f"aggregated linear cost has {ties.size} tied minimizers; "
                "returning the lowest coordinate index",
                RuntimeWarning,
                stacklevel=2,
            )
        y = np.zeros(p.dim)
        y[j] = 1.0
    elif kinds == {"quadratic"}:
        mus = np.array([c.mu for c in p.costs])
        bs = np.stack([c.b for c in p.costs])
        y = (mus[:, None] * bs).sum(axis=0) / mus.sum()
        if simplex:
            y = simplex_projection(y)
    else:
        y = _projected_gradient_optimum(p, simplex)
    return np.tile(y, (p.graph.node_count, 1))


def _projected_gradient_optimum(p, simplex, tol=1e-13, max_iter=100_000):
    def value(y):
        return float(sum(c.value(y) for c in p.costs))

    def grad(y):
        return np.sum([c.subgrad(y) for c in p.costs], axis=0)

    y = np.full(p.dim, 1.0 / p.dim) if simplex else np.zeros(p.dim)
    t = 1.0
    fy = value(y)
    for _ in range(max_iter):
        g = grad(y)
        while True:
            y_new = y - t * g
            if simplex:
                y_new = simplex_projection(y_new)
            diff = y_new - y
            f_new = value(y_new)
            if f_new <= fy + float(np.dot(g, diff)) + float(np.dot(diff, diff)) / (2 * t) + 1e-15:
                break
            t *= 0.5
            if t < 1e-16:
                break
        if np.max(np.abs(y_new - y)) <= tol:
            return y_new
        y, fy = y_new, f_new
        t = min(t * 1.5, 1e6)
    warnings.warn("centralized solver hit its iteration cap", RuntimeWarning, stacklevel=2)
    return y


def _normal_cone_residual(v, x_star, simplex):
    """Euclidean norm of the violation of the stationarity inclusion.

    On free space the cone is trivial. On the simplex, the blockwise
    condition is: constant on the support of the optimum, no larger than
    that constant elsewhere.
    """
    if not simplex:
        return float(np.linalg.norm(v))
    parts = []
    for vi, xi in zip(v, x_star):
        supp = xi > _SUPPORT_TOL
        kappa = float(np.mean(vi[supp]))
        parts.append(vi[supp] - kappa)
        off = vi[~supp] - kappa
        parts.append(np.maximum(off, 0.0))
    return float(np.linalg.norm(np.concatenate(parts)))


def _min_norm_multiplier_simplex(base, g_star, x_star):
    """Minimum-norm edge multiplier satisfying the simplex stationarity cone.

    Full-support optima reduce to a least-squares solve of the blockwise
    centered equations; optima touching the boundary become a small
    inequality-constrained quadratic program.
    """
    n_nodes, n = g_star.shape
    n_edges = base.shape[1]
    if n_edges == 0:
        return np.zeros((0, n))
    supports = x_star > _SUPPORT_TOL
    if supports.all():
        center = np.eye(n) - np.full((n, n), 1.0 / n)
        A = np.kron(base, center)
        rhs = (-g_star @ center).ravel()
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        return sol.reshape(n_edges, n)

    import cvxpy as cp

    U = cp.Variable((n_edges, n))
    kappa = cp.Variable(n_nodes)
    V = -g_star - base @ U
    constraints = []
    for i in range(n_nodes):
        supp = np.flatnonzero(supports[i])
        off = np.flatnonzero(~supports[i])
        constraints.append(V[i, supp] == kappa[i])
        if off.size:
            constraints.append(V[i, off] <= kappa[i])
    prob = cp.Problem(cp.Minimize(cp.sum_squares(U)), constraints)
    for solver in ("CLARABEL", "ECOS", "OSQP"):
        if solver not in cp.installed_solvers():
            continue
        try:
            prob.solve(solver=solver)
        except cp.error.SolverError:
            continue
        if prob.status in ("optimal", "optimal_inaccurate") and U.value is not None:
            return np.asarray(U.value)
    raise CertificateError(
        f"multiplier search failed (status {prob.status}); "
        "the instance may not admit a stationarity certificate"
    )


def _grad_bound(p, coupling):
    """Bound on the stacked subgradient norm shifted by the coupling term."""
    simplex = isinstance(p.mirror.domain, Simplex)
    if any(c.kind == "custom" for c in p.costs):
        if not simplex:
            return np.inf, True
        rng = np.random.default_rng(0xB0B)
        worst = 0.0
        for _ in range(10_000):
            x = rng.dirichlet(np.ones(p.dim), size=p.graph.node_count)
            worst = max(worst, float(np.linalg.norm(p.subgradients(x) + coupling)))
        return 1.1 * worst, False
    total = 0.0
    eye = np.eye(p.dim)
    for cost, w in zip(p.costs, coupling):
        if cost.kind == "linear":
            total += float(np.sum((cost.a + w) ** 2))
        elif simplex:
            # max of a convex function over the simplex sits at a vertex
            vals = [float(np.sum((cost.mu * (eye[v] - cost.b) + w) ** 2)) for v in range(p.dim)]
            total += max(vals)
        else:
            return np.inf, True
    return float(np.sqrt(total)), True


def dual_certificate(p: ProblemInstance, x_star=None) -> Certificate:
    """Build the stationarity certificate at the consensus optimum.

    Raises
    ------
    CertificateError
        If no multiplier brings the stationarity residual below ``CERT_TOL``.
    """
    if x_star is None:
        x_star = centralized_optimum(p)
    x_star = np.asarray(x_star, dtype=float)
    simplex = isinstance(p.mirror.domain, Simplex)
    g_star = p.subgradients(x_star)
    base = p.spring_incidence.base
    if simplex:
        u_star = _min_norm_multiplier_simplex(base, g_star, x_star)
    else:
        if p.graph.edge_count == 0:
            u_star = np.zeros((0, p.dim))
        else:
            u_star, *_ = np.linalg.lstsq(base, -g_star, rcond=None)
    v = -g_star - base @ u_star
    residual = _normal_cone_residual(v, x_star, simplex)
    if residual > CERT_TOL:
        raise CertificateError(
            f"stationarity residual {residual:.3e} exceeds {CERT_TOL:.0e}; "
            "the instance admits no consensus certificate at this optimum"
        )
    bound, exact = _grad_bound(p, base @ u_star)
    if not exact:
        logger.info("subgradient bound %.6g is a sampled estimate", bound)
    return Certificate(
        x_star=x_star,
        u_star=u_star,
        g_star=g_star,
        grad_bound=bound,
        grad_bound_exact=exact,
        residual=residual,
    )


def lagrangian(p: ProblemInstance, cert: Certificate, x) -> float:
    """Objective shifted by the certificate's coupling term.

    Coincides with the plain objective on consensus points, so its gap to
    the optimum upper-bounds plain suboptimality there.
    """
    x = np.asarray(x, dtype=float)
    coupling = p.spring_incidence @ cert.u_star
    return p.cost_value(x) + float(np.sum(coupling * x))


def lyapunov(p: ProblemInstance, cert: Certificate, x, u) -> float:
    """Energy relative to equilibrium: divergence to the optimum plus
    half the squared multiplier error. Zero exactly at the certificate."""
    x = np.asarray(x, dtype=float)
    du = np.asarray(u, dtype=float) - cert.u_star
    return p.mirror.bregman(cert.x_star, x) + 0.5 * float(np.sum(du * du))


def disagreement(p: ProblemInstance, x) -> float:
    """Half the damper-weighted quadratic form; zero exactly on consensus."""
    return 0.5 * p.damper_laplacian.quad(np.asarray(x, dtype=float))


def max_edge_gap(p: ProblemInstance, x) -> float:
    """Largest Euclidean mismatch across any edge of the graph."""
    x = np.asarray(x, dtype=float)
    if p.graph.edge_count == 0:
        return 0.0
    return max(
        float(np.linalg.norm(x[h] - x[t])) for h, t in p.graph.edges
    )


def consensus_suboptimality(p: ProblemInstance, cert: Certificate, x) -> float:
    """Objective gap at the consensus representative of a stacked point.

    The node blocks are averaged into a single feasible point (the domain
    is convex) and the full objective is evaluated there, which makes the
    result nonnegative and comparable across algorithms; the blockwise
    objective at a non-consensus point can undercut the optimum.
    """
    x = np.asarray(x, dtype=float)
    candidate = x.mean(axis=0)
    value = float(sum(c.value(candidate) for c in p.costs))
    return value - p.cost_value(cert.x_star)
