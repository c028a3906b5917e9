"""Command-line front end.

Usage::

    swarmsde SUBCOMMAND [--config FILE] [--output-dir DIR] [-v] [key=value ...]

Subcommands are ``run``, ``phase-diagram``, ``mfa-scaling``, ``laplace-check``
and ``bench``. The output directory defaults to ``$SWARMSDE_OUTPUT_DIR`` or the
working directory. Exit status is 0 on success, 1 when a run diverged or an
output could not be written, and 2 on configuration errors.
"""

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import rng as _rng
from .config import (
    ConfigError,
    build_init_spec,
    build_run_config,
    build_swarm_params,
    dump_config,
    load_config,
)
from .consensus import consensus_point, laplace_estimate
from .dynamics import StepContext, step_memory, step_memoryless
from .exceptions import DivergenceError
from .meanfield import mfa_error_curve
from .objective import batch_evaluator, get_benchmark
from .runner import phase_diagram, run
from .swarm import init_swarm

logger = logging.getLogger("swarmsde")

OUTPUT_ENV = "SWARMSDE_OUTPUT_DIR"
SUBCOMMANDS = ("run", "phase-diagram", "mfa-scaling", "laplace-check", "bench")
EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def fmt(x):
    """Deterministic round-trip formatting (17 significant digits)."""
    return format(float(x), ".17g")


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def series_rows(report):
    s = report.series
    dim = s["consensus"].shape[1]
    header = ["t", "H", "variance", "best_value"] + [f"consensus_{j}" for j in range(dim)]
    rows = [
        [fmt(s["t"][i]), fmt(s["H"][i]), fmt(s["variance"][i]), fmt(s["best_value"][i])]
        + [fmt(v) for v in s["consensus"][i]]
        for i in range(len(s["t"]))
    ]
    return header, rows


def emit_series(report, path):
    """Write the diagnostic series of ``report`` as CSV."""
    write_atomic(path, _csv_text(*series_rows(report)))


def read_series(path):
    """Parse a series CSV back into arrays (inverse of :func:`emit_series`)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    data = data.reshape(-1, len(header))
    out = {name: data[:, j] for j, name in enumerate(header[:4])}
    out["consensus"] = data[:, 4:]
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _write_json(path, payload):
    write_atomic(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _cmd_run(cfg, out):
    config = build_run_config(cfg)
    report = run(config)
    emit_series(report, os.path.join(out, "series.csv"))
    _write_json(os.path.join(out, "run_report.json"), {
        "consensus": report.consensus,
        "best_value": report.best_value,
        "success": report.success,
        "epochs_completed": report.epochs_completed,
        "n_steps": report.n_steps,
        "diverged": report.diverged,
        "divergence_step": report.divergence_step,
        "wall_time": report.wall_time,
        "metadata": report.metadata,
    })
    logger.info("run finished: %d steps, best value %s", report.n_steps, report.best_value)
    return EXIT_FAILURE if report.diverged else EXIT_OK


def _cmd_phase(cfg, out):
    base = build_run_config(cfg)
    m_grid, sigma_grid = cfg["phase.m_grid"], cfg["phase.sigma_grid"]
    probs = phase_diagram(base, m_grid, sigma_grid, cfg["phase.runs_per_cell"],
                          n_jobs=cfg["phase.n_jobs"])
    rows = [
        [fmt(m), fmt(s), fmt(probs[i, j])]
        for i, m in enumerate(m_grid)
        for j, s in enumerate(sigma_grid)
    ]
    write_atomic(os.path.join(out, "phase.csv"), _csv_text(["m", "sigma2", "success_prob"], rows))
    return EXIT_OK


def _cmd_mfa(cfg, out):
    params = build_swarm_params(cfg)
    obj = get_benchmark(cfg["objective.name"], params.dim)
    curve = mfa_error_curve(
        obj, params, cfg["mfa.ns"], cfg["mfa.n_ref"], cfg["mfa.horizon"], cfg["mfa.reps"],
        cfg["run.seed"], init=build_init_spec(cfg), statistic=cfg["mfa.statistic"],
        n_jobs=cfg["mfa.n_jobs"],
    )
    rows = [[str(n), fmt(e), fmt(s)] for n, e, s in curve.rows()]
    write_atomic(os.path.join(out, "mfa.csv"), _csv_text(["N", "error", "stderr"], rows))
    _write_json(os.path.join(out, "mfa.json"), {
        "slope": curve.slope,
        "slope_halfwidth": curve.slope_halfwidth,
        "reps": curve.reps,
        "excluded": curve.excluded,
        "exclusion_fraction": curve.exclusion_fraction,
        "checksums_match": curve.checksums_match,
        "metadata": curve.metadata,
    })
    print(f"slope {fmt(curve.slope)} +/- {fmt(curve.slope_halfwidth)}")
    return EXIT_OK


def _cmd_laplace(cfg, out):
    params = build_swarm_params(cfg)
    obj = get_benchmark(cfg["objective.name"], params.dim)
    spec = build_init_spec(cfg)
    X, _ = spec.sample(cfg["laplace.n_samples"], params.dim)
    values = obj(X)
    vmin, n = float(values.min()), values.size
    rows, ok = [], True
    for alpha in cfg["laplace.alphas"]:
        est = laplace_estimate(values, alpha)
        upper = vmin + math.log(n) / alpha
        inside = vmin <= est <= upper
        ok &= inside
        rows.append([fmt(alpha), fmt(est), fmt(vmin), fmt(upper), str(inside).lower()])
    header = ["alpha", "estimate", "minimum", "upper", "inside"]
    write_atomic(os.path.join(out, "laplace.csv"), _csv_text(header, rows))
    return EXIT_OK if ok else EXIT_FAILURE


def _cmd_bench(cfg, out):
    params = build_swarm_params(cfg)
    obj = get_benchmark(cfg["objective.name"], params.dim)
    spec = build_init_spec(cfg)
    evaluate = batch_evaluator(obj)
    kernel = step_memory if params.has_memory else step_memoryless
    timings = []
    for r in range(cfg["bench.repeats"]):
        state = init_swarm(params, replace(spec, seed=_rng.derive_seed(spec.seed, r)), obj)
        start = time.perf_counter()
        for _ in range(cfg["bench.steps"]):
            if params.has_memory:
                cons = consensus_point(state.Y, state.values, params.alpha)
            else:
                cons = consensus_point(state.X, evaluate(state.X), params.alpha)
            state = kernel(state, params, StepContext(cons, evaluate))
        timings.append(time.perf_counter() - start)
    best = min(timings)
    payload = {
        "steps": cfg["bench.steps"],
        "repeats": cfg["bench.repeats"],
        "n_particles": params.n_particles,
        "dim": params.dim,
        "seconds": timings,
        "steps_per_second": cfg["bench.steps"] / best if best > 0 else math.inf,
    }
    _write_json(os.path.join(out, "bench.json"), payload)
    print(f"{payload['steps_per_second']:.1f} steps/s")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "phase-diagram": _cmd_phase,
    "mfa-scaling": _cmd_mfa,
    "laplace-check": _cmd_laplace,
    "bench": _cmd_bench,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="swarmsde", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("overrides", nargs="*", metavar="key=value",
                        help="configuration overrides, e.g. swarm.sigma2=2 or runs_per_cell=25")
    parser.add_argument("--config", "-c", help="TOML configuration file")
    parser.add_argument("--output-dir", "-o", help=f"output directory (default ${OUTPUT_ENV} or .)")
    parser.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_intermixed_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "."
    try:
        cfg = load_config(args.config, args.overrides)
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(out, exist_ok=True)
        write_atomic(os.path.join(out, "config.toml"), dump_config(cfg))
        return _COMMANDS[args.command](cfg, out)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: diverged at step {exc.step}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
