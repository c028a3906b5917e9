"""One-step kernels of the discretized swarm dynamics.

Velocities use a semi-implicit friction step,

    V+ = (m V + dt * drift + sqrt(dt) * noise) / (m + dt * gamma),
    X+ = X + dt * V+,

with the drift and noise terms of the memoryless or the memory dynamics.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .exceptions import DivergenceError
from .swarm import apply_diffusion

DIVERGENCE_BOUND = 1e100


@dataclass(frozen=True)
class StepContext:
    """Per-step inputs that are shared by all particles.

    Attributes
    ----------
    consensus : ndarray
        Consensus point for the active ensemble.
    evaluator : callable, optional
        Vectorized objective in force this step (full or batch-restricted).
        Needed by the memory kernel to refresh local bests.
    active : ndarray, optional
        Row indices (into the current state) of the particles to advance.
        ``None`` means all particles.
    """

    consensus: np.ndarray
    evaluator: Optional[Callable] = None
    active: Optional[np.ndarray] = None

    def rows(self, n):
        if self.active is None:
            return slice(None)
        active = np.asarray(self.active, dtype=np.intp)
        if active.size == 0 or active.min() < 0 or active.max() >= n:
            raise ValueError("active index set must be nonempty and within range")
        return active


def _check_finite(state, rows):
    for arr in (state.X[rows], state.V[rows]):
        # the negated comparison also catches NaN
        if not np.all(np.abs(arr) <= DIVERGENCE_BOUND):
            raise DivergenceError(state.k)


def _noise(state, rows, lane):
    ids = state.ids[rows]
    return state.noise.normals(state.k, lane, ids)


def _advance(state, params, ctx, with_memory):
    new = state.copy()
    rows = ctx.rows(state.n_particles)
    X, V = state.X[rows], state.V[rows]
    to_cons = ctx.consensus - X
    sq = np.sqrt(params.dt)
    V_new = params.m * V + (params.dt * params.lambda2) * to_cons
    if with_memory:
        to_best = state.Y[rows] - X
        if params.lambda1 != 0:
            V_new += (params.dt * params.lambda1) * to_best
        if params.sigma1 != 0:
            B1 = _noise(state, rows, _rng.LANE_NOISE_1)
            V_new += (sq * params.sigma1) * apply_diffusion(params.diffusion, to_best, B1)
    if params.sigma2 != 0:
        B2 = _noise(state, rows, _rng.LANE_NOISE_2)
        V_new += (sq * params.sigma2) * apply_diffusion(params.diffusion, to_cons, B2)
    V_new /= params.m + params.dt * params.gamma
    new.V[rows] = V_new
    new.X[rows] = X + params.dt * V_new
    _check_finite(new, rows)
    return new


def step_memoryless(state, params, ctx):
    """Advance the active particles of the memoryless swarm by one step.

    The consensus drift and noise use ``lambda2`` and ``sigma2``. Inactive
    particles are left untouched and draw no noise.
    """
    if params.has_memory:
        raise ValueError("step_memoryless requires memory mode 'off'")
    new = _advance(state, params, ctx, with_memory=False)
    new.k += 1
    return new


def step_memory(state, params, ctx):
    """Advance the active particles of the swarm with local bests by one step.

    Adds the drift and noise towards each particle's local best, then refreshes
    the local bests with :func:`update_local_best`.
    """
    if not params.has_memory:
        raise ValueError("step_memory requires a memory mode other than 'off'")
    new = _advance(state, params, ctx, with_memory=True)
    new = update_local_best(new, params, ctx)
    new.k += 1
    return new


def smoothed_switch(e_at_x, e_at_y, beta, theta):
    """``1 + theta + tanh(beta (E(y) - E(x)))``; ``beta = inf`` gives the hard switch."""
    gap = np.asarray(e_at_y, dtype=float) - np.asarray(e_at_x, dtype=float)
    if np.isinf(beta):
        s = np.sign(gap)
    else:
        s = np.tanh(beta * gap)
    out = theta + (1.0 + s)  # keeps the result inside [theta, 2 + theta] in floating point
    return float(out) if np.ndim(out) == 0 else out


def update_local_best(state, params, ctx):
    """Refresh the local bests of the active particles from their new positions.

    Hard mode keeps ``Y`` unless the new position is strictly better than the
    cached value. Soft mode takes an explicit Euler step of the relaxation
    ``dY = kappa (X - Y) S(X, Y) dt`` and re-evaluates the objective at ``Y``.
    Operates in place on ``state`` and returns it.
    """
    if ctx.evaluator is None:
        raise ValueError("updating local bests needs an evaluator in the step context")
    rows = ctx.rows(state.n_particles)
    X = state.X[rows]
    e_x = np.asarray(ctx.evaluator(X), dtype=float)
    if params.memory == "hard":
        better = e_x < state.values[rows]
        if np.any(better):
            idx = np.arange(state.n_particles)[rows][better]
            state.Y[idx] = X[better]
            state.values[idx] = e_x[better]
        return state
    Y = state.Y[rows]
    switch = smoothed_switch(e_x, state.values[rows], params.beta, params.theta)
    Y_new = Y + params.dt * params.kappa * (X - Y) * np.reshape(switch, (-1, 1))
    state.Y[rows] = Y_new
    state.values[rows] = np.asarray(ctx.evaluator(Y_new), dtype=float)
    return state
