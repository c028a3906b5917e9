"""Swarm hyperparameters, state and initialization."""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng as _rng

DIFFUSIONS = ("isotropic", "anisotropic")
MEMORY_MODES = ("off", "soft", "hard")


@dataclass(frozen=True)
class SwarmParams:
    """Hyperparameters of the swarm dynamics.

    In memoryless mode the consensus drift and noise use ``lambda2`` and
    ``sigma2``; ``lambda1`` and ``sigma1`` must then be zero. In hard memory
    mode ``kappa``, ``theta`` and ``beta`` are overwritten with the triple
    ``(1/(2 dt), 0, inf)`` that the hard local-best update corresponds to.
    """

    m: float = 0.2
    gamma: Optional[float] = None
    lambda1: float = 0.0
    lambda2: float = 1.0
    sigma1: float = 0.0
    sigma2: float = 1.0
    alpha: float = 100.0
    beta: float = math.inf
    theta: float = 0.0
    kappa: Optional[float] = None
    dt: float = 0.01
    diffusion: str = "anisotropic"
    memory: str = "hard"
    n_particles: int = 100
    dim: int = 20

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 - self.m)
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.memory == "hard" or self.kappa is None:
            object.__setattr__(self, "kappa", 1.0 / (2.0 * self.dt))
        if self.memory == "hard":
            object.__setattr__(self, "theta", 0.0)
            object.__setattr__(self, "beta", math.inf)
        self._validate()

    def _validate(self):
        checks = [
            (self.m > 0, "m must be > 0"),
            (self.gamma >= 0, "gamma must be >= 0 (gamma defaults to 1 - m)"),
            (self.lambda1 >= 0, "lambda1 must be >= 0"),
            (self.lambda2 > 0, "lambda2 must be > 0"),
            (self.sigma1 >= 0 and self.sigma2 >= 0, "sigma1, sigma2 must be >= 0"),
            (self.alpha > 0, "alpha must be > 0"),
            (self.kappa > 0, "kappa must be > 0"),
            (self.theta >= 0, "theta must be >= 0"),
            (self.beta > 0, "beta must be > 0"),
            (self.dt > 0, "dt must be > 0"),
            (self.diffusion in DIFFUSIONS, f"diffusion must be one of {DIFFUSIONS}"),
            (self.memory in MEMORY_MODES, f"memory must be one of {MEMORY_MODES}"),
            (int(self.n_particles) >= 1, "n_particles must be >= 1"),
            (int(self.dim) >= 1, "dim must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        if self.memory == "off" and (self.lambda1 != 0 or self.sigma1 != 0):
            raise ValueError("memory 'off' requires lambda1 = sigma1 = 0")

    @property
    def has_memory(self):
        return self.memory != "off"

    def with_updates(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class InitSpec:
    """Initial law of positions and velocities.

    Each of ``position`` / ``velocity`` is ``"gaussian"`` (``*_mean``, diagonal
    ``*_var``) or ``"uniform"`` (box ``*_low`` .. ``*_high``). Scalars broadcast
    to all coordinates.
    """

    position: str = "gaussian"
    position_mean: object = 2.0
    position_var: object = 4.0
    position_low: object = -1.0
    position_high: object = 1.0
    velocity: str = "gaussian"
    velocity_mean: object = 0.0
    velocity_var: object = 1.0
    velocity_low: object = -1.0
    velocity_high: object = 1.0
    seed: int = 0

    def _law(self, which, dim):
        kind = getattr(self, which)
        if kind == "gaussian":
            mean = _broadcast(getattr(self, f"{which}_mean"), dim, f"{which}_mean")
            var = _broadcast(getattr(self, f"{which}_var"), dim, f"{which}_var")
            if np.any(var < 0):
                raise ValueError(f"{which}_var entries must be >= 0")
            return kind, mean, np.sqrt(var)
        if kind == "uniform":
            lo = _broadcast(getattr(self, f"{which}_low"), dim, f"{which}_low")
            hi = _broadcast(getattr(self, f"{which}_high"), dim, f"{which}_high")
            if np.any(hi < lo):
                raise ValueError(f"{which} box bounds are not ordered")
            return kind, lo, hi
        raise ValueError(f"{which} law must be 'gaussian' or 'uniform', got {kind!r}")

    def sample(self, n, dim):
        """Draw ``(X, V)`` of shape ``(n, dim)`` from the stream of ``seed``."""
        gen = _rng.generator(self.seed, _rng.LANE_INIT, 0)
        out = []
        for which in ("position", "velocity"):
            kind, a, b = self._law(which, dim)
            if kind == "gaussian":
                out.append(a + b * gen.standard_normal((n, dim)))
            else:
                out.append(a + (b - a) * gen.random((n, dim)))
        return out[0], out[1]


def _broadcast(value, dim, label):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"{label} has length {arr.size}, expected {dim}")
    return arr


@dataclass
class SwarmState:
    """Positions, velocities and local bests of a swarm.

    ``ids`` holds the original index of every live particle; it addresses the
    particle's row in the noise blocks and survives particle decay.
    ``values`` caches the objective value recorded when ``Y`` last changed.
    """

    X: np.ndarray
    V: np.ndarray
    Y: Optional[np.ndarray]
    values: Optional[np.ndarray]
    ids: np.ndarray
    noise: _rng.NoiseSource
    k: int = 0
    dt: float = 0.01
    meta: dict = field(default_factory=dict)

    @property
    def n_particles(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def t(self):
        return self.k * self.dt

    def copy(self):
        return SwarmState(
            self.X.copy(), self.V.copy(),
            None if self.Y is None else self.Y.copy(),
            None if self.values is None else self.values.copy(),
            self.ids.copy(), self.noise, self.k, self.dt, dict(self.meta),
        )

    def subset(self, keep):
        keep = np.asarray(keep)
        return SwarmState(
            self.X[keep], self.V[keep],
            None if self.Y is None else self.Y[keep],
            None if self.values is None else self.values[keep],
            self.ids[keep], self.noise, self.k, self.dt, dict(self.meta),
        )


def init_swarm(params, spec, obj=None, evaluator=None):
    """Sample an initial swarm.

    ``Y = X`` and the cached local-best values are ``evaluator(X)`` (the full
    objective by default). Without memory no values are cached.
    """
    n, d = int(params.n_particles), int(params.dim)
    if obj is not None and obj.dim != d:
        raise ValueError(f"objective dimension {obj.dim} does not match params.dim {d}")
    X, V = spec.sample(n, d)
    Y = values = None
    if params.has_memory:
        Y = X.copy()
        if evaluator is None and obj is not None:
            from .objective import batch_evaluator

            evaluator = batch_evaluator(obj)
        if evaluator is not None:
            values = np.asarray(evaluator(Y), dtype=float)
    return SwarmState(
        X=X, V=V, Y=Y, values=values, ids=np.arange(n),
        noise=_rng.NoiseSource(spec.seed, n, d), k=0, dt=params.dt,
    )


def apply_diffusion(kind, z, noise):
    """Scale Gaussian increments by ``D(z)``.

    Works row-wise on ``(n, d)`` arrays: isotropic multiplies each row of
    ``noise`` by the Euclidean norm of the matching row of ``z``, anisotropic
    multiplies componentwise.
    """
    z = np.asarray(z, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if z.shape != noise.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {noise.shape}")
    if kind == "anisotropic":
        return z * noise
    if kind == "isotropic":
        return np.linalg.norm(z, axis=-1, keepdims=True) * noise
    raise ValueError(f"unknown diffusion type {kind!r}")
