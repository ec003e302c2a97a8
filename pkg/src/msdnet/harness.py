"""Experiment driver: builds instances, runs every algorithm from a shared
initialization, evaluates the convergence bounds online, and emits CSV
records plus a standalone plot script.

Bound anchoring: each discrete run performs one warmup update from the
sampled initial point and anchors its bound at the post-warmup state; the
recorded window then satisfies the averaged-gap bounds exactly, with the
explicit scheme pairing each iterate with the step size used from it and
the implicit scheme averaging produced iterates uniformly.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import baselines as bl
from .dynamics import (
    StepSchedule,
    initial_state,
    msd_explicit_step,
    msd_implicit_step,
    reset_average,
    simulate_continuous,
    step_size,
)
from .errors import CertificateError, ConfigError
from .geometry import EntropyMap, EuclideanMap, FreeSpace, Simplex
from .graphs import EdgeWeights, load_graph, random_connected_graph, save_graph
from .problems import (
    Certificate,
    Custom,
    Linear,
    ProblemInstance,
    Quadratic,
    consensus_suboptimality,
    disagreement,
    dual_certificate,
    lagrangian,
    lyapunov,
    max_edge_gap,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "msdnet-config-v1"
BOUND_TOL = 1e-8

ALGORITHMS = (
    "msd_explicit",
    "msd_implicit",
    "proj_subgradient",
    "mirror_descent",
    "dual_averaging",
    "ode",
)

CSV_HEADER = "k,alpha,gap,disagreement,f_subopt,rhs,bound_ok,ms"


@dataclass(frozen=True)
class RunRecord:
    """Per-iteration metrics of one algorithm.

    ``disagreement`` carries the weight its bound uses (half the damper
    quadratic form, or a quarter for the implicit scheme), so
    ``gap + disagreement <= rhs`` is the bound check itself.
    """

    k: int
    alpha: float
    gap: float
    disagreement: float
    f_subopt: float
    max_edge_gap: float
    rhs: float
    bound_ok: str
    wall_ms: float


@dataclass
class AlgorithmRun:
    name: str
    records: list
    final_average: np.ndarray = None
    wall_seconds: float = 0.0
    error: str = None


@dataclass
class ExperimentResult:
    config: "ExperimentConfig"
    instance: ProblemInstance
    certificate: Certificate
    x0: np.ndarray
    runs: list


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment; deterministic given seeds."""

    seed: int = 0
    nodes: int = 20
    edge_prob: float = 0.3
    graph_seed: int = None
    graph_file: str = None
    dim: int = 10
    cost: str = "linear_uniform"
    mu: float = 1.0
    damper: float = 0.07
    spring: float = None
    geometry: str = "entropy"
    domain: str = "simplex"
    algorithms: tuple = ALGORITHMS
    iters: int = 1000
    diminishing_scale: float = None
    constant_alpha: float = None
    ode_horizon: float = 50.0
    ode_step: float = 0.01
    out: str = "results"
    deterministic_output: bool = True
    schema: str = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    def validate(self):
        if self.schema != SCHEMA_VERSION:
            raise ConfigError(f"schema: expected {SCHEMA_VERSION!r}, got {self.schema!r}")
        if self.graph_file is None:
            if self.nodes < 1:
                raise ConfigError("graph.nodes: must be positive")
            if self.nodes > 1 and not 0.0 < self.edge_prob <= 1.0:
                raise ConfigError("graph.edge_prob: must lie in (0, 1]")
        if self.dim < 1:
            raise ConfigError("problem.dim: must be positive")
        if self.cost not in ("linear_uniform", "quadratic"):
            raise ConfigError(f"problem.cost: unknown kind {self.cost!r}")
        if self.cost == "quadratic" and self.mu <= 0:
            raise ConfigError("problem.mu: must be positive")
        if self.damper <= 0:
            raise ConfigError("problem.damper: must be positive")
        if self.spring is not None and self.spring <= 0:
            raise ConfigError("problem.spring: must be positive")
        if self.geometry not in ("entropy", "euclidean"):
            raise ConfigError(f"problem.geometry: unknown {self.geometry!r}")
        if self.domain not in ("simplex", "free"):
            raise ConfigError(f"problem.domain: unknown {self.domain!r}")
        if self.geometry == "entropy" and self.domain != "simplex":
            raise ConfigError("problem.domain: entropy geometry requires the simplex")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"run.algorithms: unknown {sorted(unknown)}")
        if self.iters < 0:
            raise ConfigError("run.iters: must be nonnegative")
        if self.ode_horizon <= 0 or self.ode_step <= 0:
            raise ConfigError("run.ode_horizon and run.ode_step must be positive")
        return self


def benchmark_config(seed=7, **overrides) -> ExperimentConfig:
    """The default comparison preset: 20 nodes connected pairwise with
    probability 0.3, dimension-10 simplex, uniform-[0,1] linear costs,
    dampers 0.07, springs scaled by the Laplacian's top eigenvalue,
    entropy geometry, diminishing steps for the explicit family and the
    matching constant step for the implicit one."""
    return ExperimentConfig(seed=seed, **overrides).validate()


def build_instance(config: ExperimentConfig):
    """Materialize the instance and shared initial point for a config."""
    config.validate()
    if config.graph_file is not None:
        g, weights = load_graph(config.graph_file)
    else:
        gseed = config.seed if config.graph_seed is None else config.graph_seed
        if config.nodes == 1:
            from .graphs import Graph

            g = Graph(1, ())
        else:
            g = random_connected_graph(config.nodes, config.edge_prob, [gseed, 0])
        d = np.full(g.edge_count, config.damper)
        if config.spring is not None:
            s = np.full(g.edge_count, config.spring)
        else:
            from .graphs import largest_eigenvalue, weighted_laplacian

            lam = largest_eigenvalue(weighted_laplacian(g, d)) if g.edge_count else 0.0
            s = lam * d if g.edge_count else d.copy()
        weights = EdgeWeights(s, d)

    rng_costs = np.random.default_rng([config.seed, 1])
    if config.cost == "linear_uniform":
        costs = tuple(Linear(rng_costs.random(config.dim)) for _ in range(g.node_count))
    else:
        if config.domain == "simplex":
            bs = rng_costs.dirichlet(np.ones(config.dim), size=g.node_count)
        else:
            bs = rng_costs.standard_normal((g.node_count, config.dim))
        costs = tuple(Quadratic(config.mu, b) for b in bs)

    if config.geometry == "entropy":
        mirror = EntropyMap(config.dim)
    else:
        dom = Simplex(config.dim) if config.domain == "simplex" else FreeSpace(config.dim)
        mirror = EuclideanMap(dom)

    instance = ProblemInstance(g, weights, costs, mirror, config.dim)

    rng_init = np.random.default_rng([config.seed, 2])
    if config.domain == "simplex":
        x0 = rng_init.dirichlet(np.ones(config.dim), size=g.node_count)
    else:
        x0 = rng_init.standard_normal((g.node_count, config.dim))
    return instance, x0


def explicit_bound_rhs(anchor_energy, grad_bound, sum_alpha, sum_alpha_sq) -> float:
    """Right-hand side of the averaged-gap bound for the explicit scheme."""
    if sum_alpha <= 0:
        raise ValueError("need at least one step")
    return (anchor_energy + grad_bound**2 * sum_alpha_sq) / sum_alpha


def implicit_bound_rhs(anchor_energy, alpha, iterations) -> float:
    """Right-hand side of the averaged-gap bound for the implicit scheme."""
    if alpha <= 0 or iterations < 1:
        raise ValueError("need a positive step and at least one iteration")
    return anchor_energy / (alpha * iterations)


class _MsdStepper:
    has_dual = True

    def __init__(self, p, schedule, explicit):
        self.p = p
        self.schedule = schedule
        self.explicit = explicit
        self.disagreement_weight = 0.5 if explicit else 0.25

    def alpha(self, k):
        return step_size(self.schedule, k, self.p.top_eigenvalue, self.p.step_ratio)

    def init(self, x0):
        return initial_state(self.p, x0)

    def step(self, st, k):
        fn = msd_explicit_step if self.explicit else msd_implicit_step
        return fn(self.p, st, self.alpha(k))

    def reset(self, st):
        return reset_average(st)

    def average(self, st):
        return st.average

    def bound(self, anchor, grad_bound, sum_a, sum_a2, alpha, k):
        if self.explicit:
            return explicit_bound_rhs(anchor, grad_bound, sum_a, sum_a2)
        return implicit_bound_rhs(anchor, alpha, k)


@dataclass
class _BaselineState:
    x: np.ndarray
    z: np.ndarray
    avg_num: np.ndarray
    avg_den: float

    @property
    def average(self):
        return self.avg_num / self.avg_den


class _BaselineStepper:
    has_dual = False
    disagreement_weight = 0.5

    def __init__(self, p, schedule, name):
        self.p = p
        self.schedule = schedule
        self.name = name
        self.mix = bl.mixing_matrix(p.graph)

    def alpha(self, k):
        return step_size(self.schedule, k, self.p.top_eigenvalue, self.p.step_ratio)

    def init(self, x0):
        x0 = np.asarray(x0, dtype=float)
        return _BaselineState(
            x=x0, z=np.zeros_like(x0), avg_num=np.zeros_like(x0), avg_den=0.0
        )

    def step(self, st, k):
        alpha = self.alpha(k)
        avg_num = st.avg_num + alpha * st.x
        avg_den = st.avg_den + alpha
        z = st.z
        if self.name == "proj_subgradient":
            x = bl.projected_subgradient_step(self.p, self.mix, st.x, alpha)
        elif self.name == "mirror_descent":
            x = bl.mirror_descent_step(self.p, self.mix, st.x, alpha)
        else:
            z, x = bl.dual_averaging_step(self.p, self.mix, st.z, st.x, alpha)
        return _BaselineState(x=x, z=z, avg_num=avg_num, avg_den=avg_den)

    def reset(self, st):
        return replace(st, avg_num=np.zeros_like(st.x), avg_den=0.0)

    def average(self, st):
        return st.average


def _make_stepper(name, p, dim_sched, const_sched):
    if name == "msd_explicit":
        return _MsdStepper(p, dim_sched, explicit=True)
    if name == "msd_implicit":
        return _MsdStepper(p, const_sched, explicit=False)
    return _BaselineStepper(p, dim_sched, name)


def _checked(lhs, rhs, applicable):
    if not applicable or not np.isfinite(rhs):
        return "na"
    return "1" if lhs - rhs <= BOUND_TOL else "0"


def _run_discrete(name, p, cert, x0, config, dim_sched, const_sched) -> AlgorithmRun:
    t_start = time.perf_counter()
    stepper = _make_stepper(name, p, dim_sched, const_sched)
    records = []
    if config.iters == 0:
        return AlgorithmRun(name, records, None, time.perf_counter() - t_start)

    st = stepper.init(x0)
    st = stepper.step(st, 1)  # warmup; the bound anchors at this state
    anchor = lyapunov(p, cert, st.x, st.u) if stepper.has_dual else np.nan
    st = stepper.reset(st)

    ell_star = lagrangian(p, cert, cert.x_star)
    grad_bound = cert.grad_bound
    sum_a = 0.0
    sum_a2 = 0.0
    for k in range(1, config.iters + 1):
        it_start = time.perf_counter()
        alpha = stepper.alpha(k)
        st = stepper.step(st, k)
        sum_a += alpha
        sum_a2 += alpha * alpha
        xbar = stepper.average(st)
        gap = lagrangian(p, cert, xbar) - ell_star
        disag = stepper.disagreement_weight * p.damper_laplacian.quad(xbar)
        fsub = consensus_suboptimality(p, cert, xbar)
        medge = max_edge_gap(p, xbar)
        if stepper.has_dual:
            rhs = stepper.bound(anchor, grad_bound, sum_a, sum_a2, alpha, k)
            applicable = np.isfinite(grad_bound) if stepper.explicit else True
            applicable = applicable and not st.cap_exceeded
            ok = _checked(gap + disag, rhs, applicable)
        else:
            rhs, ok = np.nan, "na"
        ms = 0.0 if config.deterministic_output else (time.perf_counter() - it_start) * 1e3
        records.append(RunRecord(k, alpha, gap, disag, fsub, medge, rhs, ok, ms))
    return AlgorithmRun(
        name, records, stepper.average(st), time.perf_counter() - t_start
    )


def _run_ode(p, cert, x0, config) -> AlgorithmRun:
    t_start = time.perf_counter()
    if config.iters == 0:
        return AlgorithmRun("ode", [], None, time.perf_counter() - t_start)
    u0 = np.zeros((p.graph.edge_count, p.dim))
    traj = simulate_continuous(p, x0, u0, config.ode_horizon, config.ode_step)
    energy0 = lyapunov(p, cert, x0, u0)
    ell_star = lagrangian(p, cert, cert.x_star)
    records = []
    for idx, (t, xbar) in enumerate(zip(traj.times, traj.averages), start=1):
        gap = lagrangian(p, cert, xbar) - ell_star
        disag = disagreement(p, xbar)
        fsub = consensus_suboptimality(p, cert, xbar)
        medge = max_edge_gap(p, xbar)
        rhs = energy0 / t
        records.append(
            RunRecord(
                idx, traj.step, gap, disag, fsub, medge, rhs,
                _checked(gap + disag, rhs, True), 0.0,
            )
        )
    return AlgorithmRun("ode", records, traj.averages[-1], time.perf_counter() - t_start)


def _worker_count(n_jobs):
    env = os.environ.get("MSDNET_THREADS")
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"MSDNET_THREADS: not an integer: {env!r}") from None
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_jobs, cap))


def run(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured algorithm from one shared initialization.

    The certificate is computed once up front; a failure there aborts the
    experiment with a diagnostic. Individual algorithm failures are
    isolated into their ``AlgorithmRun.error`` so the rest continue.
    """
    config.validate()
    p, x0 = build_instance(config)
    try:
        cert = dual_certificate(p)
    except CertificateError as exc:
        raise CertificateError(f"cannot run experiment: {exc}") from exc

    lam = p.top_eigenvalue
    dim_scale = config.diminishing_scale
    if dim_scale is None and lam <= 0:
        dim_scale = 1.0
        logger.info("edgeless graph: falling back to unit diminishing scale")
    const_alpha = config.constant_alpha
    if const_alpha is None and lam <= 0:
        const_alpha = 1.0
    dim_sched = StepSchedule("diminishing", dim_scale)
    const_sched = StepSchedule("constant", const_alpha)

    def job(name):
        try:
            if name == "ode":
                return _run_ode(p, cert, x0, config)
            return _run_discrete(name, p, cert, x0, config, dim_sched, const_sched)
        except Exception as exc:  # isolate per-algorithm failures
            logger.warning("algorithm %s failed: %s", name, exc)
            return AlgorithmRun(name, [], None, 0.0, error=f"{type(exc).__name__}: {exc}")

    names = list(config.algorithms)
    workers = _worker_count(len(names))
    if workers == 1 or len(names) == 1:
        runs = [job(n) for n in names]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(job, names))
    return ExperimentResult(config, p, cert, x0, runs)


def _fmt(v):
    return format(float(v), ".17g")


def write_records(records, path) -> None:
    """Write one CSV with the fixed header; empty input yields header only."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.k},{_fmt(r.alpha)},{_fmt(r.gap)},{_fmt(r.disagreement)},"
            f"{_fmt(r.f_subopt)},{_fmt(r.rhs)},{r.bound_ok},{_fmt(r.wall_ms)}"
        )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc


def read_records(path):
    """Parse a CSV written by :func:`write_records`.

    The off-CSV diagnostic field ``max_edge_gap`` comes back as NaN.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    out = []
    for ln in lines[1:]:
        k, alpha, gap, disag, fsub, rhs, ok, ms = ln.split(",")
        out.append(
            RunRecord(
                int(k), float(alpha), float(gap), float(disag), float(fsub),
                float("nan"), float(rhs), ok, float(ms),
            )
        )
    return out


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Plot the benchmark curves from the CSV files next to this script.

Requires matplotlib; run:  python plot.py
"""
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
SERIES = {series!r}
COLUMN = "f_subopt"

fig, ax = plt.subplots(figsize=(7.0, 4.5))
for name in SERIES:
    ks, ys = [], []
    with open(HERE / (name + ".csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            ks.append(float(row["k"]))
            ys.append(max(float(row[COLUMN]), 1e-300))
    if ks:
        ax.plot(ks, ys, label=name.replace("_", " "))
ax.set_xlabel("iteration")
ax.set_ylabel(COLUMN.replace("_", " "))
ax.set_yscale("log")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "comparison.png", dpi=150)
print("wrote", HERE / "comparison.png")
'''


def emit(runs, out_dir):
    """Write one CSV per algorithm plus a standalone plot script.

    Returns the list of written paths. The plot script references the CSV
    files by relative path and is the only place plotting happens; this
    package never imports a plotting library.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    names = []
    for run_ in runs:
        path = os.path.join(out_dir, f"{run_.name}.csv")
        write_records(run_.records, path)
        paths.append(path)
        names.append(run_.name)
    script = os.path.join(out_dir, "plot.py")
    try:
        with open(script, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(_PLOT_TEMPLATE.format(series=tuple(names)))
    except OSError as exc:
        raise OSError(f"cannot write plot script to {script}: {exc}") from exc
    paths.append(script)
    return paths


def snapshot(result: ExperimentResult, out_dir):
    """Make ``out_dir`` self-contained: config, resolved graph, CSVs, plot."""
    from .cli import write_config

    os.makedirs(out_dir, exist_ok=True)
    paths = emit(result.runs, out_dir)
    cfg_path = os.path.join(out_dir, "config.ini")
    write_config(result.config, cfg_path)
    graph_path = os.path.join(out_dir, "graph.txt")
    save_graph(graph_path, result.instance.graph, result.instance.weights)
    return paths + [cfg_path, graph_path]
