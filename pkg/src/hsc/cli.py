"""Command line entry point: ``hsc {dispersion,simulate,solve-elliptic,verify}``.

Exit codes: 0 success, 1 a failed acceptance criterion, 2 bad configuration,
3 filesystem trouble, 4 a numerical failure (solver, inversion, run).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import acceptance, dispersion, elliptic, evolution
from .config import ConfigError, RunConfig, load_config, parse_function, read_boundary_csv
from .params import ValidationError

log = logging.getLogger("hsc")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_FILESYSTEM, EXIT_NUMERICAL = 0, 1, 2, 3, 4


class OutputDirError(OSError):
    pass


def _thread_limit():
    """Cap BLAS/LAPACK threads when HSC_THREADS is set."""
    raw = os.environ.get("HSC_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HSC_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("HSC_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _output_dir(args, cfg: RunConfig | None) -> Path:
    out = Path(args.out if args.out is not None else (cfg.output_dir if cfg else "."))
    if not out.is_dir():
        raise OutputDirError(f"output directory {str(out)!r} does not exist")
    return out


def _load(args, required: bool = True) -> RunConfig | None:
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    cfg = load_config(args.config)
    if getattr(args, "n_max", None) is not None:
        cfg.n_max = args.n_max
        cfg.check()
    return cfg


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------- commands


def run_dispersion(args) -> int:
    cfg = _load(args)
    out = _output_dir(args, cfg)
    table = dispersion.dispersion_table(cfg.coeffs, cfg.n_max)
    verdict = dispersion.classify_stability(cfg.params, cfg.n_max)
    csv_path, json_path = dispersion.write_dispersion(out, table, verdict)
    n, rate = dispersion.fastest_growing_mode(table)
    log.info("%s; fastest mode n=%d with Re q_n=%.6g", verdict.value, n, rate)
    log.info("wrote %s and %s", csv_path, json_path)
    return EXIT_OK


def run_simulate(args) -> int:
    cfg = _load(args)
    out = _output_dir(args, cfg)
    dt = cfg.step_size()
    log.info("N=%d M=%d dt=%.4g t_end=%.4g", cfg.N, cfg.M, dt, cfg.t_end)
    try:
        run = evolution.simulate(
            cfg.coeffs, cfg.initial_shape(), dt=dt, t_end=cfg.t_end, M=cfg.M,
            snapshot_every=cfg.snapshot_every, stop_amplitude=cfg.stop_amplitude,
        )
    except evolution.SimulationError as exc:
        evolution.write_run(out, exc.run, {**cfg.echo(), "dt": dt})
        raise
    evolution.write_run(out, run, {**cfg.echo(), "dt": dt})
    m = run.final.monitors
    log.info("%s at t=%.6g; max ‖ρ‖∞ %.3g, area drift %.2e", run.status, run.final.t, m.max_sup, m.max_area_drift)
    return EXIT_OK


def run_solve_elliptic(args) -> int:
    cfg = _load(args)
    out = _output_dir(args, cfg)
    shape = cfg.elliptic_shape()
    if cfg.boundary_data is not None:
        data = read_boundary_csv(cfg.base_dir / cfg.boundary_data, cfg.N)
    else:
        data = parse_function(cfg.boundary, cfg.N, cfg.seed)
    c = cfg.coeffs
    if cfg.problem == "inner":
        field, flux = elliptic.solve_inner_general(c, shape, data, cfg.M)
        extra = {"projection_mean": elliptic.weighted_mean(shape, data)}
    else:
        field, flux = elliptic.solve_outer_general(c, shape, data, M=cfg.M)
        extra = {"rim_residual": float(np.max(np.abs(elliptic.outer_rim_residual(c, field))))}
    theta = shape.theta
    r = field.physical_radius()
    rows = (
        (field.r[j], theta[k], r[j, k] * np.cos(theta[k]), r[j, k] * np.sin(theta[k]), field.values[j, k])
        for j in range(field.mesh.J)
        for k in range(cfg.N)
    )
    _write_rows(out / "field.csv", ["s", "theta", "x", "y", "value"], rows)
    _write_rows(out / "flux.csv", ["theta", "boundary", "flux"], zip(theta, data, flux))
    summary = {
        "problem": cfg.problem,
        "N": cfg.N,
        "M": cfg.M,
        "J": field.mesh.J,
        "max_abs_flux": float(np.max(np.abs(flux))),
        **extra,
        "config": cfg.echo(),
    }
    _write_json(out / "elliptic.json", summary)
    log.info("%s problem solved on %d x %d nodes", cfg.problem, field.mesh.J, cfg.N)
    return EXIT_OK


def run_verify(args) -> int:
    _load(args, required=False)  # validates a config when one is given
    out = _output_dir(args, None) if args.out is not None else None
    results = acceptance.run_all(args.criteria)
    table = acceptance.format_table(results)
    if not args.quiet:
        print(table)
    report = {
        "passed": all(r.passed for r in results),
        "criteria": [r.as_dict() for r in results],
    }
    if out is not None:
        _write_json(out / "verify.json", report)
        (out / "verify.txt").write_text(table + "\n")
    return EXIT_OK if report["passed"] else EXIT_FAILED


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsc", description="Rotating Hele-Shaw interface dynamics.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="plain-text key = value run configuration")
    common.add_argument("--out", type=Path, help="existing output directory (default: output_dir from the config)")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dispersion", parents=[common], help="tabulate l_n and q_n and classify stability")
    p.add_argument("--n-max", type=int, help="largest |n| in the table")
    p.set_defaults(func=run_dispersion)

    p = sub.add_parser("simulate", parents=[common], help="evolve an initial interface")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("solve-elliptic", parents=[common], help="solve the disk or annulus problem on one shape")
    p.set_defaults(func=run_solve_elliptic)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--criteria", type=int, nargs="+", choices=sorted(acceptance.CRITERIA), help="subset to run")
    p.set_defaults(func=run_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigError, ValidationError, dispersion.RangeError) as exc:
        print(f"hsc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"hsc: filesystem error: {exc}", file=sys.stderr)
        return EXIT_FILESYSTEM
    except (
        elliptic.SolverError,
        evolution.SimulationError,
        evolution.OperatorInversionError,
        dispersion.ConsistencyError,
    ) as exc:
        print(f"hsc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
