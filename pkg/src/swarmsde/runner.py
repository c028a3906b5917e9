"""Epoch driver with data and particle mini-batching, and the phase-diagram sweep."""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import rng as _rng
from .consensus import consensus_point
from .diagnostics import classify_success, empirical_variance, h_functional
from .dynamics import StepContext, step_memory, step_memoryless
from .exceptions import DivergenceError
from .objective import ObjectiveFunction, batch_evaluator, get_benchmark, make_data_batches
from .schedules import ScheduleState, cooling_step, particle_decay, stagnation_kick
from .swarm import InitSpec, SwarmParams, init_swarm

logger = logging.getLogger(__name__)

UPDATE_MODES = ("full", "partial")


@dataclass
class RunConfig:
    """Everything a single optimization run depends on.

    Give either ``n_epochs`` or ``horizon``; they are related by
    ``horizon = n_epochs * (M / batch_size_data) * (N / batch_size_particles) * dt``.
    ``record_every=0`` records only the initial and the final state.
    The run stops early once the recorded consensus moved less than
    ``stop_tol`` over the last ``stop_window`` records; ``stop_tol=None``
    disables the test.
    """

    objective: Union[ObjectiveFunction, str] = "rastrigin"
    params: SwarmParams = field(default_factory=SwarmParams)
    init: InitSpec = field(default_factory=InitSpec)
    n_epochs: Optional[int] = None
    horizon: Optional[float] = None
    batch_size_data: Optional[int] = None
    batch_size_particles: Optional[int] = None
    update: str = "full"
    cooling: bool = False
    mu: float = 0.0
    min_particles: int = 2
    stagnation: bool = False
    tau: Optional[float] = None
    kick: float = 1.0
    kick_target: str = "velocity"
    stop_tol: Optional[float] = 1e-8
    stop_window: int = 20
    record_every: int = 1
    success_tol: float = 0.25
    seed: int = 0

    def resolve_objective(self):
        if isinstance(self.objective, ObjectiveFunction):
            if self.objective.dim != self.params.dim:
                raise ValueError("objective dimension does not match params.dim")
            return self.objective
        return get_benchmark(self.objective, self.params.dim)

    def layout(self, obj=None):
        """Return ``(M, n_E, N, n_N, steps_per_epoch)`` after validation."""
        obj = obj or self.resolve_objective()
        M = obj.n_terms if obj.sum_structured else 1
        n_e = self.batch_size_data or M
        N = int(self.params.n_particles)
        n_n = self.batch_size_particles or N
        if not obj.sum_structured and n_e != 1:
            raise ValueError("data batching needs a sum-structured objective")
        if n_e < 1 or M % n_e:
            raise ValueError(f"batch_size_data={n_e} must divide the term count {M}")
        if n_n < 1 or N % n_n:
            raise ValueError(f"batch_size_particles={n_n} must divide n_particles={N}")
        if self.update not in UPDATE_MODES:
            raise ValueError(f"update must be one of {UPDATE_MODES}")
        if self.record_every < 0:
            raise ValueError("record_every must be >= 0")
        return M, n_e, N, n_n, (M // n_e) * (N // n_n)

    def epochs(self, obj=None):
        steps = self.layout(obj)[-1]
        per_epoch = steps * self.params.dt
        if self.n_epochs is not None:
            n = int(self.n_epochs)
            if n < 0:
                raise ValueError("n_epochs must be >= 0")
            if self.horizon is not None and not math.isclose(n * per_epoch, self.horizon):
                raise ValueError("n_epochs and horizon are inconsistent")
            return n
        if self.horizon is None:
            raise ValueError("give n_epochs or horizon")
        n = round(self.horizon / per_epoch)
        if not math.isclose(n * per_epoch, self.horizon, rel_tol=1e-9):
            raise ValueError(
                f"horizon {self.horizon} is not a whole number of epochs of length {per_epoch}"
            )
        return n


@dataclass
class RunReport:
    """Result of :func:`run`.

    ``series`` maps ``t``, ``H``, ``variance``, ``best_value`` to 1-D arrays
    and ``consensus`` to an ``(rows, d)`` array.
    """

    consensus: Optional[np.ndarray]
    best_value: float
    series: dict
    success: Optional[bool]
    epochs_completed: int
    n_steps: int
    diverged: bool
    divergence_step: Optional[int] = None
    wall_time: float = 0.0
    metadata: dict = field(default_factory=dict)


class _Recorder:
    def __init__(self):
        self.rows = {"t": [], "H": [], "variance": [], "best_value": [], "consensus": []}

    def add(self, state, params, consensus, best):
        t = state.t
        if self.rows["t"] and t <= self.rows["t"][-1]:
            return
        self.rows["t"].append(t)
        self.rows["H"].append(h_functional(state, params))
        self.rows["variance"].append(empirical_variance(state))
        self.rows["best_value"].append(best)
        self.rows["consensus"].append(np.array(consensus, dtype=float))

    def arrays(self, dim):
        out = {k: np.asarray(v, dtype=float) for k, v in self.rows.items() if k != "consensus"}
        cons = self.rows["consensus"]
        out["consensus"] = np.vstack(cons) if cons else np.empty((0, dim))
        return out


def _ensemble_consensus(state, params, evaluator, rows, alpha):
    if params.has_memory:
        return consensus_point(state.Y[rows], state.values[rows], alpha), None
    vals = evaluator(state.X[rows])
    return consensus_point(state.X[rows], vals, alpha), vals


def run(config):
    """Run the mini-batch swarm optimizer described by ``config``."""
    t0 = time.perf_counter()
    obj = config.resolve_objective()
    M, n_e, N, n_n, steps_per_epoch = config.layout(obj)
    n_epochs = config.epochs(obj)
    base = config.params
    params = base
    spec = replace(config.init, seed=config.seed)
    batching = obj.sum_structured and n_e < M

    sched = ScheduleState(
        alpha=base.alpha, sigma1=base.sigma1, sigma2=base.sigma2, n_particles=N,
        cooling=config.cooling, mu=config.mu, min_particles=config.min_particles,
        stagnation=config.stagnation, tau=config.tau, kick=config.kick,
        kick_target=config.kick_target,
    )
    kernel = step_memory if params.has_memory else step_memoryless

    plan = make_data_batches(M, n_e, config.seed, 1) if batching else None
    first_eval = batch_evaluator(obj, plan.batches[0] if batching else None)
    state = init_swarm(params, spec, obj, evaluator=first_eval)

    cons, vals = _ensemble_consensus(state, params, first_eval, slice(None), params.alpha)
    best = float(np.min(state.values if params.has_memory else vals))
    rec = _Recorder()
    rec.add(state, params, cons, best)

    diverged, div_step, epoch_done = False, None, 0
    stopped_early = False
    try:
        for epoch in range(1, n_epochs + 1):
            if batching and epoch > 1:
                plan = make_data_batches(M, n_e, config.seed, epoch)
            batches = plan.batches if batching else (None,)
            var_start = empirical_variance(state) if sched.mu > 0 else None
            n_cur = state.n_particles
            for batch in batches:
                evaluator = batch_evaluator(obj, batch)
                if n_n == n_cur:
                    parts = (slice(None),)
                else:
                    perm = _rng.generator(config.seed, _rng.LANE_PARTICLES, state.k)
                    parts = np.sort(perm.permutation(n_cur).reshape(-1, n_n), axis=1)
                for part in parts:
                    cons, vals = _ensemble_consensus(state, params, evaluator, part, params.alpha)
                    if vals is not None:
                        best = min(best, float(vals.min()))
                    if config.record_every and state.k % config.record_every == 0:
                        rec.add(state, params, cons, best)
                    active = None if (config.update == "full" or isinstance(part, slice)) else part
                    k_before = state.k
                    state = kernel(state, params, StepContext(cons, evaluator, active))
                    if params.has_memory:
                        best = min(best, float(state.values.min()))
                    if sched.stagnation:
                        state, sched = stagnation_kick(state, sched, cons, counter=k_before)
            epoch_done = epoch
            if config.stop_tol is not None and _stalled(rec, config.stop_window, config.stop_tol):
                stopped_early = True
                break
            if epoch == n_epochs:
                break
            if sched.cooling or sched.mu > 0:
                state, sched = _end_of_epoch(state, sched, config, var_start, n_n, epoch)
                params = base.with_updates(
                    alpha=sched.alpha, sigma1=sched.sigma1, sigma2=sched.sigma2,
                    n_particles=state.n_particles,
                )
            else:
                sched = cooling_step(sched)
    except DivergenceError as exc:
        diverged, div_step = True, exc.step
        logger.info("run diverged at step %d", exc.step)

    final = None
    success = None
    if not diverged:
        full = batch_evaluator(obj)
        pts = state.Y if params.has_memory else state.X
        vals = full(pts)
        final = consensus_point(pts, vals, params.alpha)
        best = min(best, float(vals.min()))
        rec.add(state, params, final, best)
    if obj.minimizer is not None:
        success = classify_success(final, obj.minimizer, config.success_tol, diverged)

    return RunReport(
        consensus=final,
        best_value=best,
        series=rec.arrays(obj.dim),
        success=success,
        epochs_completed=epoch_done,
        n_steps=state.k,
        diverged=diverged,
        divergence_step=div_step,
        wall_time=time.perf_counter() - t0,
        metadata={
            "objective": obj.name,
            "steps_per_epoch": steps_per_epoch,
            "n_epochs": n_epochs,
            "final_particles": state.n_particles,
            "kicks": state.meta.get("kicks", 0),
            "stopped_early": stopped_early,
            "stagnation_reference": "successive partition-level consensus points",
        },
    )


def _stalled(rec, window, tol):
    cons = rec.rows["consensus"]
    if len(cons) < window:
        return False
    last = np.vstack(cons[-window:])
    return bool(np.max(np.linalg.norm(last - last[-1], axis=1)) < tol)


def _end_of_epoch(state, sched, config, var_start, n_n, epoch):
    n_cur = state.n_particles
    if sched.mu > 0:
        n_new = particle_decay(n_cur, sched.mu, var_start, empirical_variance(state),
                               sched.min_particles)
        n_new = min(n_cur, n_n * math.ceil(n_new / n_n))
        if n_new < n_cur:
            gen = _rng.generator(config.seed, _rng.LANE_DECAY, epoch)
            keep = np.sort(gen.choice(n_cur, n_new, replace=False))
            state = state.subset(keep)
            logger.debug("epoch %d: particles %d -> %d", epoch, n_cur, n_new)
    sched = replace(cooling_step(sched), n_particles=state.n_particles)
    return state, sched


def _phase_cell(base, m, sigma2, seed):
    p = base.params
    params = p.with_updates(m=m, gamma=1.0 - m, sigma2=sigma2, sigma1=p.lambda1 * sigma2)
    cfg = replace(base, params=params, seed=seed, record_every=0)
    report = run(cfg)
    return bool(report.success), report.diverged


def phase_diagram(base, m_grid, sigma_grid, runs_per_cell=25, n_jobs=1,
                  return_divergence=False):
    """Empirical success probability over an ``(m, sigma2)`` grid.

    Each cell runs ``runs_per_cell`` seeded runs with ``gamma = 1 - m`` and
    ``sigma1 = lambda1 * sigma2``; run ``r`` of cell ``(i, j)`` uses the seed
    derived from ``(base.seed, i, j, r)``. Diverged runs count as failures.
    Returns an array of shape ``(len(m_grid), len(sigma_grid))``; with
    ``return_divergence=True`` also the fraction of diverged runs per cell.
    The result does not depend on ``n_jobs``.
    """
    m_grid, sigma_grid = list(m_grid), list(sigma_grid)
    if not m_grid or not sigma_grid:
        raise ValueError("grids must be nonempty")
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    tasks = [
        (i, j, _rng.derive_seed(base.seed, i, j, r))
        for i in range(len(m_grid))
        for j in range(len(sigma_grid))
        for r in range(runs_per_cell)
    ]
    if n_jobs == 1:
        results = [_phase_cell(base, m_grid[i], sigma_grid[j], s) for i, j, s in tasks]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_phase_cell)(base, m_grid[i], sigma_grid[j], s) for i, j, s in tasks
        )
    counts = np.zeros((len(m_grid), len(sigma_grid)))
    blown = np.zeros_like(counts)
    for (i, j, _), (ok, diverged) in zip(tasks, results):
        counts[i, j] += ok
        blown[i, j] += diverged
    if return_divergence:
        return counts / runs_per_cell, blown / runs_per_cell
    return counts / runs_per_cell
