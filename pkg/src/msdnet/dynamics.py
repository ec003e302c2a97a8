"""Discrete and continuous mass-spring-damper consensus dynamics.

States carry the stacked node variable, one spring elongation block per
edge, and a running average of iterates. The explicit step linearizes the
cost and pairs each iterate with the step size used from it (a weighted
average); the implicit step solves a proximal subproblem and averages the
produced iterates uniformly. Both update the spring variable from the
freshly computed node variable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .geometry import bregman_prox
from .problems import ProblemInstance

# Relative slack before a step size is reported as exceeding its cap; wide
# enough to absorb the eigenvalue safety inflation at borderline steps.
_CAP_SLACK = 1e-7


@dataclass(frozen=True)
class SolverState:
    """Iterate of a discrete run: node blocks, spring blocks, averages."""

    x: np.ndarray
    u: np.ndarray
    k: int = 1
    avg_num: np.ndarray = None
    avg_den: float = 0.0
    cap_exceeded: bool = False

    @property
    def average(self):
        if self.avg_den <= 0:
            raise ValueError("no iterates accumulated yet")
        return self.avg_num / self.avg_den


def initial_state(p: ProblemInstance, x0) -> SolverState:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.graph.node_count, p.dim):
        raise ValueError("initial point must be stacked (nodes, dim)")
    if not p.feasible(x0):
        raise DomainError("initial point is infeasible")
    return SolverState(
        x=x0,
        u=np.zeros((p.graph.edge_count, p.dim)),
        k=1,
        avg_num=np.zeros_like(x0),
        avg_den=0.0,
    )


def reset_average(state: SolverState) -> SolverState:
    """Clear the running average and restart the iteration counter."""
    return replace(state, k=1, avg_num=np.zeros_like(state.x), avg_den=0.0)


def _coupling_force(p, state):
    return p.damper_laplacian @ state.x + p.spring_incidence @ state.u


def _check_cap(alpha, cap, label, exceeded_before):
    if alpha > cap * (1.0 + _CAP_SLACK):
        warnings.warn(
            f"step size {alpha:.6g} exceeds the {label} cap {cap:.6g}; "
            "convergence-bound checks do not apply",
            RuntimeWarning,
            stacklevel=3,
        )
        return True
    return exceeded_before


def msd_explicit_step(p: ProblemInstance, state: SolverState, alpha: float) -> SolverState:
    """One explicit update: subgradient plus coupling force, mirror step,
    then the spring update from the new node variable.

    The running average accumulates the incoming iterate with this step's
    weight, matching the averaged-gap bound for the explicit scheme.
    """
    cap_exceeded = _check_cap(alpha, p.explicit_step_cap, "explicit", state.cap_exceeded)
    g = p.subgradients(state.x)
    w = _coupling_force(p, state)
    x_new = p.mirror.mirror_step(state.x, alpha * (g + w))
    u_new = state.u + alpha * (p.spring_incidence.T @ x_new)
    return SolverState(
        x=x_new,
        u=u_new,
        k=state.k + 1,
        avg_num=state.avg_num + alpha * state.x,
        avg_den=state.avg_den + alpha,
        cap_exceeded=cap_exceeded,
    )


def msd_implicit_step(p: ProblemInstance, state: SolverState, alpha: float) -> SolverState:
    """One implicit update: the node subproblem keeps the full cost instead
    of its linearization. Linear costs collapse to a single mirror step;
    other costs are solved nodewise to tolerance.

    The running average accumulates the produced iterate with unit weight.
    """
    cap_exceeded = _check_cap(alpha, p.implicit_step_cap, "implicit", state.cap_exceeded)
    w = _coupling_force(p, state)
    if all(c.kind == "linear" for c in p.costs):
        coeffs = np.stack([c.a for c in p.costs])
        x_new = p.mirror.mirror_step(state.x, alpha * (coeffs + w))
    else:
        rows = [
            bregman_prox(p.mirror, state.x[i], alpha * w[i], p.costs[i], alpha)
            for i in range(p.graph.node_count)
        ]
        x_new = np.stack(rows)
    u_new = state.u + alpha * (p.spring_incidence.T @ x_new)
    return SolverState(
        x=x_new,
        u=u_new,
        k=state.k + 1,
        avg_num=state.avg_num + x_new,
        avg_den=state.avg_den + 1.0,
        cap_exceeded=cap_exceeded,
    )


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing (``scale / sqrt(k)``) or constant step sizes.

    When ``scale`` is omitted the defaults are the largest admissible
    values: half the inverse top eigenvalue for the diminishing schedule,
    and the implicit cap for the constant one.
    """

    kind: str
    scale: float = None

    def __post_init__(self):
        if self.kind not in ("diminishing", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.scale is not None and self.scale <= 0:
            raise ValueError("schedule scale must be positive")


def step_size(schedule: StepSchedule, k: int, lam: float, ratio: float) -> float:
    """Step size at iteration ``k`` (1-based).

    ``lam`` is the damper Laplacian's top eigenvalue and ``ratio`` the
    elementwise damper-to-spring minimum; defaults derived from them
    require ``lam > 0``.
    """
    if k < 1:
        raise ValueError("iterations are 1-based")
    if schedule.scale is None and lam <= 0:
        raise ValueError("default schedules need a positive top eigenvalue")
    if schedule.kind == "diminishing":
        scale = schedule.scale if schedule.scale is not None else 0.5 / lam
        return scale / math.sqrt(k)
    if schedule.scale is not None:
        return schedule.scale
    return min(1.0 / lam, 0.5 * ratio)


@dataclass(frozen=True)
class ContinuousTrajectory:
    """Sampled output of the continuous dynamics.

    ``averages[i]`` is the trapezoid running mean of the node variable up
    to ``times[i]``; the final raw state is kept for diagnostics.
    """

    times: np.ndarray
    averages: np.ndarray
    x_final: np.ndarray
    u_final: np.ndarray
    step: float
    retries: int


def simulate_continuous(
    p: ProblemInstance, x0, u0, horizon: float, step: float, record_every: int = None
) -> ContinuousTrajectory:
    """Integrate the continuous dynamics with classical fourth-order
    Runge-Kutta in mirror coordinates.

    The state evolves as the gradient of the potential; the node variable
    is recovered through the inverse gradient map at every stage, so the
    domain is preserved exactly for the supported geometries. If a step
    produces non-finite values the step size is halved and the integration
    restarts, up to ten times.
    """
    for c in p.costs:
        if c.kind not in ("linear", "quadratic"):
            raise ValueError("continuous simulation needs differentiable costs")
    if horizon <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)

    ld, es = p.damper_laplacian, p.spring_incidence

    def velocity(z, u):
        x = p.mirror.grad_inv(z)
        dz = -(ld @ x + es @ u + p.subgradients(x))
        du = es.T @ x
        return dz, du, x

    h = float(step)
    for retry in range(11):
        n_steps = max(1, int(round(horizon / h)))
        h_eff = horizon / n_steps
        if record_every is None:
            every = max(1, n_steps // 1000)
        else:
            every = max(1, int(record_every))
        z = p.mirror.grad(x0)
        u = u0.copy()
        x = x0.copy()
        area = np.zeros_like(x0)
        times, averages = [], []
        ok = True
        for i in range(n_steps):
            k1z, k1u, _ = velocity(z, u)
            k2z, k2u, _ = velocity(z + 0.5 * h_eff * k1z, u + 0.5 * h_eff * k1u)
            k3z, k3u, _ = velocity(z + 0.5 * h_eff * k2z, u + 0.5 * h_eff * k2u)
            k4z, k4u, _ = velocity(z + h_eff * k3z, u + h_eff * k3u)
            z = z + (h_eff / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
            u = u + (h_eff / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
                ok = False
                break
            x_new = p.mirror.grad_inv(z)
            area += 0.5 * h_eff * (x + x_new)
            x = x_new
            t = (i + 1) * h_eff
            if (i + 1) % every == 0 or i + 1 == n_steps:
                times.append(t)
                averages.append(area / t)
        if ok:
            return ContinuousTrajectory(
                times=np.array(times),
                averages=np.stack(averages),
                x_final=x,
                u_final=u,
                step=h_eff,
                retries=retry,
            )
        h *= 0.5
    raise DomainError(
        "continuous simulation left the domain even after 10 step halvings"
    )
