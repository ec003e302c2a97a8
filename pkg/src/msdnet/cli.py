"""Command-line entry point.

Subcommands
-----------
benchmark
    Build the default comparison preset, run every algorithm, and write a
    self-contained output directory (config snapshot, graph file, one CSV
    per algorithm, plot script).
run
    Execute an experiment described by an INI config file.
verify
    Run the randomized invariant suite and print one line per property.

Exit codes: 0 all checks passed, 2 a bound or invariant was violated,
3 configuration or I/O error, 4 numerical failure. The ``MSDNET_THREADS``
environment variable caps worker threads.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import fields

from .errors import CertificateError, ConfigError, ConvergenceError, DomainError
from .harness import (
    ALGORITHMS,
    SCHEMA_VERSION,
    ExperimentConfig,
    benchmark_config,
    run,
    snapshot,
)
from .verify import run_checks

EXIT_OK = 0
EXIT_BOUND = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

# section -> {key: (config field, parser)}
_INT = int
_FLOAT = float


def _parse_bool(v):
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _parse_algorithms(v):
    return tuple(part.strip() for part in v.split(",") if part.strip())


def _opt(parser):
    def inner(v):
        return None if v.strip().lower() == "auto" else parser(v)

    return inner


_SCHEMA = {
    "meta": {"schema": ("schema", str)},
    "graph": {
        "nodes": ("nodes", _INT),
        "edge_prob": ("edge_prob", _FLOAT),
        "seed": ("graph_seed", _opt(_INT)),
        "file": ("graph_file", _opt(str)),
    },
    "problem": {
        "dim": ("dim", _INT),
        "cost": ("cost", str),
        "mu": ("mu", _FLOAT),
        "damper": ("damper", _FLOAT),
        "spring": ("spring", _opt(_FLOAT)),
        "geometry": ("geometry", str),
        "domain": ("domain", str),
    },
    "run": {
        "seed": ("seed", _INT),
        "iters": ("iters", _INT),
        "algorithms": ("algorithms", _parse_algorithms),
        "out": ("out", str),
        "diminishing_scale": ("diminishing_scale", _opt(_FLOAT)),
        "constant_alpha": ("constant_alpha", _opt(_FLOAT)),
        "ode_horizon": ("ode_horizon", _FLOAT),
        "ode_step": ("ode_step", _FLOAT),
        "deterministic_output": ("deterministic_output", _parse_bool),
    },
}


def parse_config(path) -> ExperimentConfig:
    """Read an INI experiment config; unknown sections or keys are errors."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    values = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            field_name, parser = _SCHEMA[section][key]
            try:
                values[field_name] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}") from None
    return ExperimentConfig(**values).validate()


def write_config(config: ExperimentConfig, path) -> None:
    """Write a config snapshot readable by :func:`parse_config`."""
    cp = configparser.ConfigParser()
    by_field = {
        field_name: (section, key)
        for section, keys in _SCHEMA.items()
        for key, (field_name, _) in keys.items()
    }
    for f in fields(ExperimentConfig):
        section, key = by_field[f.name]
        value = getattr(config, f.name)
        if value is None:
            text = "auto"
        elif f.name == "algorithms":
            text = ", ".join(value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, text)
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def _print_summary(result):
    print(f"instance: {result.instance.graph.node_count} nodes, "
          f"{result.instance.graph.edge_count} edges, dim {result.instance.dim}")
    print(f"certificate residual {result.certificate.residual:.3e}, "
          f"subgradient bound {result.certificate.grad_bound:.6g}"
          f"{'' if result.certificate.grad_bound_exact else ' (estimate)'}")
    print(f"{'algorithm':<18} {'iters':>6} {'final f gap':>13} {'final gap':>13} "
          f"{'bounds':>7} {'secs':>7}")
    for algo in result.runs:
        if algo.error is not None:
            print(f"{algo.name:<18} failed: {algo.error}")
            continue
        if not algo.records:
            print(f"{algo.name:<18} {0:>6} {'-':>13} {'-':>13} {'-':>7} "
                  f"{algo.wall_seconds:>7.2f}")
            continue
        last = algo.records[-1]
        checked = [r for r in algo.records if r.bound_ok != "na"]
        if not checked:
            status = "n/a"
        elif all(r.bound_ok == "1" for r in checked):
            status = "ok"
        else:
            status = "FAIL"
        print(f"{algo.name:<18} {last.k:>6} {last.f_subopt:>13.4e} "
              f"{last.gap + last.disagreement:>13.4e} {status:>7} "
              f"{algo.wall_seconds:>7.2f}")


def _experiment_exit_code(result):
    if any(r.error is not None for r in result.runs):
        return EXIT_NUMERICAL
    for algo in result.runs:
        if any(rec.bound_ok == "0" for rec in algo.records):
            return EXIT_BOUND
    return EXIT_OK


def _cmd_benchmark(args):
    overrides = {}
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.algorithms is not None:
        overrides["algorithms"] = _parse_algorithms(args.algorithms)
    if args.geometry is not None:
        overrides["geometry"] = args.geometry
    if args.out is not None:
        overrides["out"] = args.out
    config = benchmark_config(seed=args.seed, **overrides)
    result = run(config)
    snapshot(result, config.out)
    _print_summary(result)
    code = _experiment_exit_code(result)
    if code == EXIT_BOUND:
        for algo in result.runs:
            bad = [rec.k for rec in algo.records if rec.bound_ok == "0"]
            if bad:
                print(f"bound violated: {algo.name} at iterations {bad[:5]}...",
                      file=sys.stderr)
    return code


def _cmd_run(args):
    config = parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iters is not None:
        overrides["iters"] = args.iters
    if args.algorithms is not None:
        overrides["algorithms"] = _parse_algorithms(args.algorithms)
    if args.geometry is not None:
        overrides["geometry"] = args.geometry
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides).validate()
    result = run(config)
    snapshot(result, config.out)
    _print_summary(result)
    return _experiment_exit_code(result)


def _cmd_verify(args):
    results = run_checks(seed=args.seed)
    ok = True
    for res in results:
        status = "pass" if res.ok else "FAIL"
        print(f"{status}  {res.name:<28} {res.detail}")
        ok = ok and res.ok
    return EXIT_OK if ok else EXIT_BOUND


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msdnet",
        description="Distributed consensus optimization via mass-spring-damper "
        "dynamics, with online convergence-bound verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("benchmark", help="run the default comparison preset")
    bench.add_argument("--seed", type=int, default=7)
    bench.add_argument("--out", default=None, help="output directory")
    bench.add_argument("--iters", type=int, default=None)
    bench.add_argument("--algorithms", default=None,
                       help=f"comma list from {', '.join(ALGORITHMS)}")
    bench.add_argument("--geometry", choices=("entropy", "euclidean"), default=None)
    bench.set_defaults(fn=_cmd_benchmark)

    runp = sub.add_parser("run", help="run an experiment from a config file")
    runp.add_argument("--config", required=True)
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--out", default=None)
    runp.add_argument("--iters", type=int, default=None)
    runp.add_argument("--algorithms", default=None)
    runp.add_argument("--geometry", choices=("entropy", "euclidean"), default=None)
    runp.set_defaults(fn=_cmd_run)

    ver = sub.add_parser("verify", help="run the randomized invariant suite")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CertificateError, ConvergenceError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
