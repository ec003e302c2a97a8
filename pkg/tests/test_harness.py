import numpy as np
import pytest

from msdnet import (
    ALGORITHMS,
    EntropyMap,
    ExperimentConfig,
    benchmark_config,
    build_instance,
    emit,
    explicit_bound_rhs,
    implicit_bound_rhs,
    read_records,
    run,
)
from msdnet.harness import AlgorithmRun, CSV_HEADER, RunRecord


def small_config(**overrides):
    base = dict(
        seed=0, nodes=6, edge_prob=0.5, dim=4, iters=40,
        algorithms=("msd_explicit", "msd_implicit"), ode_horizon=2.0,
    )
    base.update(overrides)
    return ExperimentConfig(**base).validate()


# --------------------------------------------------------------- bound RHS

def test_explicit_rhs_arithmetic():
    # constant 0.1 over ten steps with unit energy and bound 2
    assert explicit_bound_rhs(1.0, 2.0, 1.0, 0.1) == pytest.approx(1.4)


def test_explicit_rhs_zero_grad_bound():
    assert explicit_bound_rhs(3.0, 0.0, 1.5, 0.4) == pytest.approx(2.0)


def test_implicit_rhs_arithmetic():
    assert implicit_bound_rhs(2.0, 0.5, 4) == pytest.approx(1.0)
    assert implicit_bound_rhs(2.0, 0.5, 8) == pytest.approx(0.5)


def test_rhs_validation():
    with pytest.raises(ValueError):
        explicit_bound_rhs(1.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        implicit_bound_rhs(1.0, 0.0, 3)


def test_explicit_rhs_eventually_decreasing_on_benchmark():
    cfg = benchmark_config(seed=1, iters=400, algorithms=("msd_explicit",))
    res = run(cfg)
    rhs = [r.rhs for r in res.runs[0].records]
    # decreasing beyond a finite burn-in under the diminishing schedule
    tail = rhs[50:]
    assert all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))


# ------------------------------------------------------------------- run()

def test_run_shares_initialization_and_isolates_failures():
    cfg = small_config(algorithms=("msd_explicit", "ode"), domain="simplex")
    res = run(cfg)
    assert [r.name for r in res.runs] == ["msd_explicit", "ode"]
    assert all(r.error is None for r in res.runs)


def test_run_zero_iterations_empty_records():
    cfg = small_config(iters=0, algorithms=ALGORITHMS)
    res = run(cfg)
    assert all(r.records == [] for r in res.runs)
    assert all(r.error is None for r in res.runs)


def test_run_deterministic_records():
    cfg = small_config(algorithms=("msd_explicit", "msd_implicit", "dual_averaging"))
    a = run(cfg)
    b = run(cfg)
    for ra, rb in zip(a.runs, b.runs):
        assert len(ra.records) == len(rb.records)
        for x, y in zip(ra.records, rb.records):
            assert x == y


def test_run_single_node_matches_centralized_oracle():
    cfg = small_config(nodes=1, dim=4, iters=100, algorithms=("msd_explicit",))
    res = run(cfg)
    records = res.runs[0].records
    p = res.instance
    a = p.costs[0].a

    mirror = EntropyMap(4)
    y = res.x0[0].copy()
    y = mirror.mirror_step(y, 1.0 * a)  # warmup, unit fallback scale at k=1
    num = np.zeros(4)
    den = 0.0
    f_star = p.costs[0].value(res.certificate.x_star[0])
    for k, rec in enumerate(records, start=1):
        alpha = 1.0 / np.sqrt(k)
        num += alpha * y
        den += alpha
        y = mirror.mirror_step(y, alpha * a)
        gap = p.costs[0].value(num / den) - f_star
        assert rec.gap == pytest.approx(gap, abs=1e-12)
        assert rec.disagreement == 0.0


def test_run_bounds_hold_on_benchmark_preset():
    cfg = benchmark_config(seed=2, iters=300,
                           algorithms=("msd_explicit", "msd_implicit"))
    res = run(cfg)
    for algo in res.runs:
        assert all(r.bound_ok == "1" for r in algo.records)
        assert all(r.gap + r.disagreement >= -1e-9 for r in algo.records)


def test_run_cap_violation_skips_bound_checks():
    cfg = small_config(algorithms=("msd_explicit",), diminishing_scale=50.0)
    with pytest.warns(RuntimeWarning, match="cap"):
        res = run(cfg)
    assert all(r.bound_ok == "na" for r in res.runs[0].records)


def test_run_certificate_failure_aborts():
    from msdnet import CertificateError

    cfg = small_config(cost="quadratic", domain="free", geometry="euclidean")
    # free-space quadratic instances have certificates; force failure with
    # a bad explicit optimum instead
    p, _ = build_instance(cfg)
    bad = np.zeros((p.graph.node_count, p.dim))
    from msdnet import dual_certificate

    with pytest.raises(CertificateError):
        dual_certificate(p, bad + np.arange(p.dim))  # not an optimum


def test_threads_env_respected(monkeypatch):
    monkeypatch.setenv("MSDNET_THREADS", "1")
    res = run(small_config())
    assert all(r.error is None for r in res.runs)
    monkeypatch.setenv("MSDNET_THREADS", "junk")
    from msdnet import ConfigError

    with pytest.raises(ConfigError, match="MSDNET_THREADS"):
        run(small_config())


# -------------------------------------------------------------------- emit

def test_emit_empty_records_header_only(tmp_path):
    paths = emit([AlgorithmRun("msd_explicit", [])], tmp_path)
    csv = tmp_path / "msd_explicit.csv"
    assert csv.read_text() == CSV_HEADER + "\n"
    assert (tmp_path / "plot.py").exists()
    assert str(csv) in [str(p) for p in paths]


def test_emit_round_trip(tmp_path):
    cfg = small_config(iters=25)
    res = run(cfg)
    emit(res.runs, tmp_path)
    for algo in res.runs:
        parsed = read_records(tmp_path / f"{algo.name}.csv")
        assert len(parsed) == len(algo.records)
        for a, b in zip(parsed, algo.records):
            assert a.k == b.k
            for fieldname in ("alpha", "gap", "disagreement", "f_subopt", "rhs", "wall_ms"):
                va, vb = getattr(a, fieldname), getattr(b, fieldname)
                assert va == vb or (np.isnan(va) and np.isnan(vb))
            assert a.bound_ok == b.bound_ok


def test_emit_benchmark_file_count(tmp_path):
    cfg = benchmark_config(seed=0, iters=5, ode_horizon=0.5, ode_step=0.01)
    res = run(cfg)
    paths = emit(res.runs, tmp_path)
    csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert csvs == sorted(f"{n}.csv" for n in ALGORITHMS)
    assert (tmp_path / "plot.py").exists()
    assert len(paths) == len(ALGORITHMS) + 1


def test_emit_io_error_carries_path(tmp_path):
    target = tmp_path / "blocked"
    target.write_text("file, not a directory")
    with pytest.raises(OSError, match="blocked"):
        emit([AlgorithmRun("msd_explicit", [])], target / "sub")


def test_records_fixed_header_and_17_digits(tmp_path):
    rec = RunRecord(1, 1 / 3, 2 / 3, 0.1, 0.2, 0.0, float("nan"), "na", 0.0)
    emit([AlgorithmRun("x", [rec])], tmp_path)
    text = (tmp_path / "x.csv").read_text().splitlines()
    assert text[0] == "k,alpha,gap,disagreement,f_subopt,rhs,bound_ok,ms"
    assert text[1].split(",")[1] == "0.33333333333333331"
    back = read_records(tmp_path / "x.csv")[0]
    assert back.alpha == 1 / 3  # 17 significant digits round-trip exactly
