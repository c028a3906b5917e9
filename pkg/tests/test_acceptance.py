"""Acceptance suite.

Each test carries a ``criterion(n)`` marker; the terminal summary prints one
PASS/FAIL line per criterion. Tolerances are the acceptance thresholds and
must not be loosened.
"""

import json
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from swarmsde import (
    InitSpec, RunConfig, StepContext, SwarmParams, check_well_prepared_memoryless,
    consensus_point, empirical_variance, h_memory, h_memoryless, init_swarm, laplace_estimate,
    make_rastrigin, make_sphere, mfa_error_curve, phase_diagram, run, step_memory,
)
from swarmsde.cli import main
from swarmsde.objective import batch_evaluator

from helpers import make_state


def report(n, text):
    print(f"[criterion {n}] {text}")


# ---------------------------------------------------------------- criterion 1
def oracle_consensus(points, values, alpha):
    """Unshifted weighted mean in 80-bit extended precision."""
    pts = points.astype(np.longdouble)
    w = np.exp(-np.longdouble(alpha) * values.astype(np.longdouble))
    return (w[:, None] * pts).sum(axis=0) / w.sum()


@pytest.mark.criterion(1)
def test_consensus_exactness():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        n, d = int(rng.integers(1, 257)), int(rng.integers(1, 33))
        alpha = (1.0, 1e2, 1e4)[i % 3]
        pts = rng.normal(size=(n, d)) * 10.0 ** rng.uniform(-2, 2)
        # values in [0, 1] keep exp(-alpha v) inside the extended-precision range
        vals = rng.integers(0, 2**30, size=n) / 2.0**30
        got = consensus_point(pts, vals, alpha)
        ref = oracle_consensus(pts, vals, alpha)
        err = float(np.max(np.abs(got - ref)) / np.max(np.abs(pts)))
        worst = max(worst, err)
        assert err <= 1e-10
        shift = float(rng.integers(-64, 64))
        assert np.array_equal(consensus_point(pts, vals + shift, alpha), got)
    elapsed = time.perf_counter() - start
    report(1, f"max relative error {worst:.3e}, {elapsed:.2f} s")
    assert elapsed < 10


# ---------------------------------------------------------------- criterion 2
@pytest.mark.criterion(2)
def test_laplace_envelope():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    obj = make_rastrigin(5)
    for sample in (rng.normal(size=10_000), obj(rng.normal(1, 2, size=(10_000, 5)))):
        n, vmin = sample.size, float(sample.min())
        for j in range(11):
            alpha = 2.0**j
            est = laplace_estimate(sample, alpha)
            width = math.log(n) / alpha
            assert vmin <= est <= vmin + width
            assert est - vmin <= width
    elapsed = time.perf_counter() - start
    report(2, f"{elapsed:.2f} s")
    assert elapsed < 5


# ---------------------------------------------------------------- criterion 3
def _random_state(rng, memory):
    n, d = int(rng.integers(1, 50)), int(rng.integers(1, 10))
    X = rng.normal(size=(n, d)) * 10.0 ** rng.uniform(-3, 3)
    V = rng.normal(size=(n, d)) * 10.0 ** rng.uniform(-3, 3)
    Y = X + rng.normal(size=(n, d)) * 10.0 ** rng.uniform(-3, 3) if memory else None
    p = SwarmParams(m=rng.uniform(0.01, 1.0), gamma=rng.uniform(0.0, 2.0),
                    lambda1=rng.uniform(0.0, 2.0) if memory else 0.0,
                    memory="hard" if memory else "off", n_particles=n, dim=d)
    return make_state(X, V, Y=Y), p


def _sq(A):
    return float(np.mean(np.sum(A**2, axis=1)))


@pytest.mark.criterion(3)
def test_h_equivalence():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    for _ in range(1000):
        s, p = _random_state(rng, memory=False)
        c = p.gamma / (2 * p.m)
        var, v2 = empirical_variance(s), _sq(s.V)
        h = h_memoryless(s, p)
        assert 0.5 * c**2 * var + 0.5 * v2 <= h <= 1.5 * (c**2 + 1) * (var + v2)
    for _ in range(1000):
        s, p = _random_state(rng, memory=True)
        c = p.gamma / (2 * p.m)
        var, v2, xy = empirical_variance(s), _sq(s.V), _sq(s.X - s.Y)
        h = h_memory(s, p)
        k = c**2 + 1 + 3 * p.lambda1 / p.m + 2 * p.gamma**2 / p.m**2
        assert 0.5 * c**2 * var + 0.5 * v2 + 1.5 * p.lambda1 / p.m * xy <= h
        assert h <= 2.5 * k * (var + v2 + xy)
    elapsed = time.perf_counter() - start
    report(3, f"{elapsed:.2f} s")
    assert elapsed < 5


# ---------------------------------------------------------------- criterion 4
@pytest.mark.criterion(4)
def test_exponential_decay():
    start = time.perf_counter()
    obj = make_sphere(4)
    p = SwarmParams(m=0.02, gamma=0.98, lambda2=1.0, sigma2=0.1, alpha=0.01, memory="off",
                    n_particles=200, dim=4)
    init = InitSpec(position_mean=1.0, position_var=1.0, velocity_var=1.0)
    cfg = RunConfig(obj, p, init, horizon=20.0, record_every=10, stop_tol=None, seed=404)
    x0 = init_swarm(p, replace(init, seed=cfg.seed)).X
    check = check_well_prepared_memoryless(p, obj(x0), 0.0)
    assert check.passed and check.mu[0] > 0
    rep = run(cfg)
    H, t = rep.series["H"], rep.series["t"]
    slope = np.polyfit(t, np.log(H), 1)[0]
    ratio = H[-1] / H[0]
    elapsed = time.perf_counter() - start
    report(4, f"fitted slope {slope:.3f}, final/initial {ratio:.3e}, chi {check.chi:.3g}, "
              f"{elapsed:.2f} s")
    assert slope < 0
    assert ratio < 1e-6
    assert elapsed < 30


# ---------------------------------------------------------------- criterion 5
@pytest.mark.criterion(5)
def test_local_best_monotone():
    start = time.perf_counter()
    obj = make_rastrigin(20)
    p = SwarmParams(m=0.2, lambda1=0.4, sigma1=0.8, sigma2=2.0, alpha=100.0, n_particles=100,
                    dim=20)
    state = init_swarm(p, InitSpec(seed=505), obj)
    evaluate = batch_evaluator(obj)
    for _ in range(10_000):
        prev = state.values
        cons = consensus_point(state.Y, state.values, p.alpha)
        state = step_memory(state, p, StepContext(cons, evaluate))
        assert np.all(state.values <= prev)
    np.testing.assert_array_equal(state.values, obj(state.Y))
    elapsed = time.perf_counter() - start
    report(5, f"10^4 steps, {elapsed:.2f} s")
    assert elapsed < 30


# ---------------------------------------------------------------- criterion 6
PHASE_GRID = [1.8, 1.9, 2.0, 2.1, 2.2, 16.0, 32.0]
# measured on the first run with base seed 2024 (25 runs per cell)
PHASE_FIXTURE = [0.28, 0.56, 0.80, 0.60, 0.24, 0.0, 0.0]


@pytest.mark.slow
@pytest.mark.criterion(6)
def test_rastrigin_phase_structure():
    start = time.perf_counter()
    p = SwarmParams(m=0.2, lambda1=0.4, lambda2=1.0, alpha=100.0, dt=0.01, n_particles=100,
                    dim=20, memory="hard")
    base = RunConfig("rastrigin", p, InitSpec(), horizon=100.0, seed=2024)
    success, diverged = phase_diagram(base, [0.2], PHASE_GRID, runs_per_cell=25,
                                      n_jobs=min(8, os.cpu_count() or 1), return_divergence=True)
    elapsed = time.perf_counter() - start
    report(6, f"sigma2 {PHASE_GRID}: success {success[0].tolist()}, "
              f"diverged {diverged[0].tolist()}, {elapsed:.0f} s")
    assert success[0].max() >= 0.8
    assert np.all(diverged[0, 5:] == 1.0) and np.all(success[0, 5:] == 0.0)
    np.testing.assert_array_equal(success[0], PHASE_FIXTURE)


# ---------------------------------------------------------------- criterion 7
@pytest.mark.slow
@pytest.mark.criterion(7)
def test_mean_field_slope():
    start = time.perf_counter()
    p = SwarmParams(memory="off", dim=4, alpha=1.0)
    curve = mfa_error_curve(make_sphere(4), p, [50, 100, 200, 400, 800], 6400, 5.0, 20, seed=2024)
    elapsed = time.perf_counter() - start
    report(7, f"errors {np.round(curve.errors, 5).tolist()}, slope {curve.slope:.3f} "
              f"+/- {curve.slope_halfwidth:.3f}, {elapsed:.0f} s")
    assert curve.checksums_match
    assert -1.3 <= curve.slope <= -0.7
    assert elapsed < 600


# ---------------------------------------------------------------- criterion 8
def _deterministic_consensus(dt):
    obj = make_sphere(4)
    p = SwarmParams(m=0.5, gamma=0.5, lambda2=1.0, sigma2=0.0, alpha=1.0, dt=dt,
                    n_particles=50, dim=4, memory="off")
    init = InitSpec(position_mean=1.0, position_var=1.0)
    cfg = RunConfig(obj, p, init, horizon=1.0, record_every=0, stop_tol=None, seed=808)
    return run(cfg).consensus


@pytest.mark.criterion(8)
def test_deterministic_order():
    start = time.perf_counter()
    ref = _deterministic_consensus(0.1 / 64)
    steps = [0.1, 0.05, 0.025]
    errs = [np.max(np.abs(_deterministic_consensus(h) - ref)) for h in steps]
    order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    pairwise = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    elapsed = time.perf_counter() - start
    report(8, f"errors {errs}, fitted order {order:.3f}, pairwise {pairwise.round(3).tolist()}, "
              f"{elapsed:.2f} s")
    assert order >= 1.0 - 0.15
    assert np.all(pairwise >= 1.0 - 0.15)
    assert elapsed < 10


# ---------------------------------------------------------------- criterion 9
def _outputs(tmp_path, name, args):
    out = tmp_path / name
    assert main(args + ["-o", str(out)]) in (0, 1)
    return {f: (out / f).read_bytes() for f in sorted(os.listdir(out))}


@pytest.mark.criterion(9)
def test_reproducibility(tmp_path):
    small = ["swarm.dim=5", "swarm.n_particles=20", "run.horizon=2", "seed=909"]
    a = _outputs(tmp_path, "a", ["run"] + small)
    b = _outputs(tmp_path, "b", ["run"] + small)
    assert a["series.csv"] == b["series.csv"]
    assert a["config.toml"] == b["config.toml"]
    # wall-clock time is the only field allowed to differ between reruns
    ra, rb = json.loads(a["run_report.json"]), json.loads(b["run_report.json"])
    assert ra.pop("wall_time") >= 0 and rb.pop("wall_time") >= 0
    assert ra == rb

    phase = small + ["record_every=0", "m_grid=[0.2, 0.5]", "sigma_grid=[1, 3]",
                     "runs_per_cell=3"]
    serial = _outputs(tmp_path, "p1", ["phase-diagram"] + phase + ["phase.n_jobs=1"])
    parallel = _outputs(tmp_path, "p2", ["phase-diagram"] + phase + ["phase.n_jobs=2"])
    assert serial["phase.csv"] == parallel["phase.csv"]

    mfa = ["objective.name=sphere", "swarm.dim=3", "memory=off", "alpha=1", "ns=[8, 16, 32]",
           "n_ref=256", "mfa.horizon=0.5", "reps=4", "seed=909"]
    serial = _outputs(tmp_path, "m1", ["mfa-scaling"] + mfa + ["mfa.n_jobs=1"])
    parallel = _outputs(tmp_path, "m2", ["mfa-scaling"] + mfa + ["mfa.n_jobs=2"])
    assert serial["mfa.csv"] == parallel["mfa.csv"]
    report(9, "run, phase-diagram and mfa-scaling outputs bit-identical across reruns and "
              "worker counts")
