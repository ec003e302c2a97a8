"""Mirror maps, Bregman divergences, and the associated proximal solvers.

Two geometries are provided: the Euclidean half-squared-norm on free space
or on the probability simplex, and the negative entropy on the simplex.
All operations act on the last axis and broadcast over leading axes, so a
stacked ``(nodes, n)`` array is processed blockwise in one call. Scalar
outputs (potentials, divergences) are summed over all blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

FEAS_TOL = 1e-9
# Coordinates this small after an entropy update signal underflow; they are
# flagged rather than clamped so divergence bookkeeping stays exact.
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class FreeSpace:
    """Unconstrained domain of a fixed dimension."""

    dim: int

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x)
        return x.shape[-1] == self.dim and bool(np.all(np.isfinite(x)))


@dataclass(frozen=True)
class Simplex:
    """Probability simplex: nonnegative coordinates summing to one."""

    dim: int

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x)
        if x.shape[-1] != self.dim or not np.all(np.isfinite(x)):
            return False
        sums = np.sum(x, axis=-1)
        return bool(np.all(x >= -tol) and np.all(np.abs(sums - 1.0) <= tol))


def simplex_projection(v):
    """Euclidean projection onto the probability simplex (last axis).

    Sort-and-threshold method; exact up to floating point.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1)
    ks = np.arange(1, n + 1)
    cond = u * ks > css - 1.0
    rho = np.count_nonzero(cond, axis=-1)
    theta = (np.take_along_axis(css, rho[..., None] - 1, axis=-1).squeeze(-1) - 1.0) / rho
    return np.maximum(v - theta[..., None], 0.0)


class MirrorMap:
    """Common interface of the supported Bregman geometries.

    Concrete maps supply the potential, its gradient, the inverse gradient
    map where it exists in closed form, and the exact minimizer of
    ``<c, y> + B(y, x)`` over the domain (the mirror step).
    """

    domain = None

    def potential(self, y):
        raise NotImplementedError

    def grad(self, y):
        raise NotImplementedError

    def grad_inv(self, z):
        raise NotImplementedError

    def bregman(self, x_prime, x):
        raise NotImplementedError

    def mirror_step(self, x, c):
        raise NotImplementedError

    def _check(self, x, name="point"):
        if not self.domain.contains(x):
            raise DomainError(f"{name} lies outside {self.domain}")


class EuclideanMap(MirrorMap):
    """Half squared norm; divergence is half the squared distance."""

    def __init__(self, domain):
        self.domain = domain

    def potential(self, y):
        return 0.5 * float(np.sum(np.asarray(y, dtype=float) ** 2))

    def grad(self, y):
        return np.asarray(y, dtype=float)

    def grad_inv(self, z):
        if isinstance(self.domain, Simplex):
            raise DomainError(
                "the identity gradient map has no closed-form inverse onto the simplex"
            )
        return np.asarray(z, dtype=float)

    def bregman(self, x_prime, x):
        d = np.asarray(x_prime, dtype=float) - np.asarray(x, dtype=float)
        return 0.5 * float(np.sum(d * d))

    def mirror_step(self, x, c):
        self._check(x, "anchor")
        y = np.asarray(x, dtype=float) - np.asarray(c, dtype=float)
        if isinstance(self.domain, Simplex):
            return simplex_projection(y)
        return y


class EntropyMap(MirrorMap):
    """Negative entropy on the simplex; divergence is the KL divergence."""

    def __init__(self, dim):
        self.domain = Simplex(dim)

    def potential(self, y):
        y = np.asarray(y, dtype=float)
        return float(np.sum(np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)))

    def grad(self, y):
        y = np.asarray(y, dtype=float)
        if np.min(y) <= 0:
            raise DomainError("entropy gradient requires strictly positive coordinates")
        return 1.0 + np.log(y)

    def grad_inv(self, z):
        z = np.asarray(z, dtype=float)
        e = np.exp(z - np.max(z, axis=-1, keepdims=True))
        return e / np.sum(e, axis=-1, keepdims=True)

    def bregman(self, x_prime, x):
        xp = np.asarray(x_prime, dtype=float)
        x = np.asarray(x, dtype=float)
        self._check(xp, "first argument")
        self._check(x, "second argument")
        if np.min(x) <= 0:
            raise DomainError("KL divergence requires an interior second argument")
        terms = np.where(xp > 0, xp * np.log(np.where(xp > 0, xp, 1.0) / x), 0.0)
        return float(np.sum(terms))

    def mirror_step(self, x, c):
        x = np.asarray(x, dtype=float)
        self._check(x, "anchor")
        if np.min(x) <= 0:
            raise DomainError("entropy mirror step requires an interior anchor")
        e = -np.asarray(c, dtype=float)
        e -= np.max(e, axis=-1, keepdims=True)
        y = x * np.exp(e)
        y /= np.sum(y, axis=-1, keepdims=True)
        if np.min(y) < UNDERFLOW_FLOOR:
            warnings.warn(
                "entropy mirror step produced a coordinate below 1e-300; "
                "divergences from this iterate may be unreliable",
                RuntimeWarning,
                stacklevel=2,
            )
        return y


def _prox_objective(mirror, x, c, cost, alpha, y):
    return alpha * cost.value(y) + float(np.dot(c, y)) + mirror.bregman(y, x)


def bregman_prox(mirror, x, c, cost, alpha, tol=1e-10, max_iter=1000):
    """Exact or iterative minimizer of ``alpha*cost(y) + <c, y> + B(y, x)``.

    Closed forms: linear costs fold into the mirror step; quadratic costs
    under the Euclidean map reduce to a shifted projection. Everything else
    runs a backtracking proximal-gradient loop in the mirror geometry and
    stops on a fixed-point residual below ``tol`` (the solution is the
    unique fixed point of ``y = mirror_step(x, c + alpha*grad cost(y))``).

    Raises
    ------
    ConvergenceError
        If the inner loop stalls; carries the residual achieved.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)

    kind = getattr(cost, "kind", "custom")
    if kind == "linear":
        return mirror.mirror_step(x, c + alpha * cost.a)
    if kind == "quadratic" and isinstance(mirror, EuclideanMap):
        mu = cost.mu
        target = (x - c + alpha * mu * cost.b) / (1.0 + alpha * mu)
        if isinstance(mirror.domain, Simplex):
            return simplex_projection(target)
        return target

    # Backtracking proximal gradient in the mirror geometry.
    y = x.copy()
    eta = 1.0
    fy = _prox_objective(mirror, x, c, cost, alpha, y)
    residual = np.inf
    for _ in range(max_iter):
        grad_full = alpha * cost.subgrad(y) + c + mirror.grad(y) - mirror.grad(x)
        accepted = False
        for _ in range(60):
            y_new = mirror.mirror_step(y, eta * grad_full)
            step_div = mirror.bregman(y_new, y)
            f_new = _prox_objective(mirror, x, c, cost, alpha, y_new)
            if f_new <= fy + float(np.dot(grad_full.ravel(), (y_new - y).ravel())) + step_div / eta + 1e-15:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        fixed_point = mirror.mirror_step(x, c + alpha * cost.subgrad(y_new))
        residual = float(np.max(np.abs(fixed_point - y_new)))
        converged = residual <= tol or step_div <= 1e-12
        y, fy = y_new, f_new
        if converged:
            return y
        eta = min(eta * 1.5, 1.0)
    raise ConvergenceError(
        "proximal inner solve stalled", residual=residual, iterations=max_iter
    )
