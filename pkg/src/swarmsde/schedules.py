"""Epoch-level schedules: cooling, particle decay and stagnation kicks."""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import rng as _rng

MIN_PARTICLES = 2


@dataclass(frozen=True)
class ScheduleState:
    """Schedule bookkeeping carried between epochs.

    ``tau=None`` means the default stagnation threshold ``1e-4 * sqrt(d)``.
    """

    epoch: int = 1
    alpha: float = 100.0
    sigma1: float = 0.0
    sigma2: float = 1.0
    n_particles: int = 100
    cooling: bool = False
    mu: float = 0.0
    min_particles: int = MIN_PARTICLES
    stagnation: bool = False
    tau: Optional[float] = None
    kick: float = 1.0
    kick_target: str = "velocity"
    previous_consensus: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma values must be >= 0")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.kick < 0 or (self.tau is not None and self.tau < 0):
            raise ValueError("tau and kick must be >= 0")
        if self.kick_target not in ("position", "velocity"):
            raise ValueError("kick_target must be 'position' or 'velocity'")

    def threshold(self, dim):
        return 1e-4 * math.sqrt(dim) if self.tau is None else self.tau


def cooling_step(s):
    """End-of-epoch cooling: double alpha and divide sigmas by ``log(epoch + 2)``."""
    if not s.cooling:
        return replace(s, epoch=s.epoch + 1)
    factor = math.log(s.epoch + 2)
    return replace(
        s,
        epoch=s.epoch + 1,
        alpha=2.0 * s.alpha,
        sigma1=s.sigma1 / factor,
        sigma2=s.sigma2 / factor,
    )


def particle_decay(n_particles, mu, var_start, var_end, min_particles=MIN_PARTICLES):
    """Particle count for the next epoch, shrunk with the variance ratio.

    Returns ``ceil(N ((1 - mu) + mu var_end / var_start))``, at least
    ``min_particles`` and never more than ``N`` when the variance did not
    grow. A collapsed swarm (``var_start == 0``) keeps its size.
    """
    n = int(n_particles)
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [0, 1], got {mu}")
    if var_start <= 0 or mu == 0:
        return n
    new = math.ceil(n * ((1.0 - mu) + mu * var_end / var_start))
    return max(new, min(min_particles, n))


def stagnation_kick(state, s, new_consensus, counter=None):
    """Kick all particles with Brownian noise if the consensus stopped moving.

    The kick fires when ``|new_consensus - previous_consensus| < tau``; it adds
    ``kick * sqrt(dt) * N(0, I)`` to every particle's velocity (or position).
    The previous consensus is updated either way. ``counter`` addresses the
    random stream and defaults to the state's step counter.
    """
    new_consensus = np.array(new_consensus, dtype=float)
    prev = s.previous_consensus
    s = replace(s, previous_consensus=new_consensus)
    if prev is None or not s.stagnation:
        return state, s
    if not np.linalg.norm(new_consensus - prev) < s.threshold(state.dim):
        return state, s
    state = state.copy()
    state.meta["kicks"] = state.meta.get("kicks", 0) + 1
    if s.kick == 0:
        return state, s
    counter = state.k if counter is None else counter
    noise = state.noise.normals(counter, _rng.LANE_KICK, state.ids)
    target = state.V if s.kick_target == "velocity" else state.X
    target += s.kick * math.sqrt(state.dt) * noise
    return state, s
