"""Empirical mean-field approximation rate of the memoryless dynamics.

A large reference swarm supplies a frozen consensus trajectory standing in for
the consensus of the mean-field law. Each ``N``-particle interacting system is
then coupled to ``N`` proxy mean-field particles that start from the same
initial data, consume the same Gaussian increments, but are driven by the
frozen trajectory instead of their own consensus.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import rng as _rng
from .consensus import consensus_point
from .dynamics import StepContext, step_memoryless
from .exceptions import DivergenceError
from .objective import batch_evaluator
from .swarm import InitSpec, init_swarm

logger = logging.getLogger(__name__)


class _TappedNoise(_rng.NoiseSource):
    """Noise source that fingerprints every block it hands out."""

    def __init__(self, seed, n_rows, dim):
        super().__init__(seed, n_rows, dim)
        self.digest = hashlib.blake2b(digest_size=16)

    def normals(self, step, lane, rows=None):
        out = super().normals(step, lane, rows)
        self.digest.update(np.ascontiguousarray(out).tobytes())
        return out


@dataclass(frozen=True)
class MfaCurve:
    """Coupling error as a function of the swarm size.

    ``errors[j]`` is the estimate for ``ns[j]``, ``stderr[j]`` its standard
    error over repetitions, ``slope`` the least-squares slope of
    ``log(error)`` against ``log(N)`` and ``slope_halfwidth`` its 95%
    confidence half-width.
    """

    ns: tuple
    errors: np.ndarray
    stderr: np.ndarray
    reps: int
    slope: float
    slope_halfwidth: float
    excluded: np.ndarray
    checksums_match: bool
    metadata: dict = field(default_factory=dict)

    @property
    def exclusion_fraction(self):
        return float(self.excluded.sum()) / (len(self.ns) * self.reps)

    def rows(self):
        return [(int(n), float(e), float(s)) for n, e, s in zip(self.ns, self.errors, self.stderr)]


def _reference_trajectory(obj, params, init, seed, n_ref, n_steps):
    evaluate = batch_evaluator(obj)
    p = params.with_updates(n_particles=n_ref)
    state = init_swarm(p, replace(init, seed=seed))
    traj = np.empty((n_steps, obj.dim))
    for k in range(n_steps):
        traj[k] = consensus_point(state.X, evaluate(state.X), p.alpha)
        state = step_memoryless(state, p, StepContext(traj[k]))
    return traj


def _coupled_errors(obj, params, init, seed, n, traj):
    """Per-step coupling errors between an interacting swarm and its proxy.

    Returns ``(mean_over_particles, max_over_particles, digests_equal)``, each
    error array holding one entry per recorded time ``t_0 .. t_K``.
    """
    evaluate = batch_evaluator(obj)
    p = params.with_updates(n_particles=n)
    spec = replace(init, seed=seed)
    sys_ = init_swarm(p, spec)
    proxy = sys_.copy()
    sys_.noise = _TappedNoise(seed, n, obj.dim)
    proxy.noise = _TappedNoise(seed, n, obj.dim)
    n_steps = traj.shape[0]
    mean_err = np.zeros(n_steps + 1)
    max_err = np.zeros(n_steps + 1)
    for k in range(n_steps):
        own = consensus_point(sys_.X, evaluate(sys_.X), p.alpha)
        sys_ = step_memoryless(sys_, p, StepContext(own))
        proxy = step_memoryless(proxy, p, StepContext(traj[k]))
        per = np.sum((sys_.X - proxy.X) ** 2 + (sys_.V - proxy.V) ** 2, axis=1)
        mean_err[k + 1] = per.mean()
        max_err[k + 1] = per.max()
    same = sys_.noise.digest.digest() == proxy.noise.digest.digest()
    return mean_err, max_err, same


def _repetition(r, obj, params, init, seed, ns, n_ref, n_steps, statistic):
    """One repetition: the reference trajectory and every coupled system.

    Returns one sample per size (``None`` when that run diverged) and whether
    all coupled pairs consumed identical noise.
    """
    try:
        traj = _reference_trajectory(
            obj, params, init, _rng.derive_seed(seed, r, n_ref), n_ref, n_steps
        )
    except DivergenceError:
        logger.info("repetition %d: reference swarm diverged", r)
        return [None] * len(ns), True
    samples, all_same = [], True
    for n in ns:
        try:
            mean_err, max_err, same = _coupled_errors(
                obj, params, init, _rng.derive_seed(seed, r, n), n, traj
            )
        except DivergenceError:
            samples.append(None)
            continue
        all_same &= same
        samples.append(mean_err if statistic == "mean" else max_err.max())
    return samples, all_same


def mfa_error_curve(obj, params, ns, n_ref, horizon, reps, seed, init=None,
                    statistic="mean", strict=True, n_jobs=1):
    """Estimate the mean-field coupling error for each swarm size in ``ns``.

    Parameters
    ----------
    obj : ObjectiveFunction
    params : SwarmParams
        Memoryless parameters; ``n_particles`` is ignored.
    ns : sequence of int
        Strictly increasing swarm sizes.
    n_ref : int
        Size of the reference swarm, at least ``8 * max(ns)`` when ``strict``.
    horizon : float
        Simulated time ``T``.
    reps : int
        Independent repetitions per size.
    seed : int
    init : InitSpec, optional
    statistic : {"mean", "max"}
        ``"mean"`` averages the squared coupling error over particles and
        repetitions before taking the supremum over time. Particles are
        exchangeable, so this estimates ``max_i sup_t E[...]`` without the
        upward bias of a maximum over noisy samples. ``"max"`` takes
        ``max_i sup_t`` inside every repetition and then averages.
    strict : bool
        Enforce ``n_ref >= 8 * max(ns)``.
    n_jobs : int
        Worker processes for the repetitions; results do not depend on it.

    Notes
    -----
    The interacting swarm of size ``N`` in repetition ``r`` is seeded from
    ``(seed, r, N)`` and the reference swarm from ``(seed, r, n_ref)``, so
    ``N == n_ref`` reproduces the reference exactly.
    """
    if params.has_memory:
        raise ValueError("the coupling experiment is defined for memory mode 'off'")
    ns = tuple(int(n) for n in ns)
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("ns must be nonempty and strictly increasing")
    if strict and n_ref < 8 * max(ns):
        raise ValueError(f"n_ref={n_ref} must be at least 8 * max(ns) = {8 * max(ns)}")
    if statistic not in ("mean", "max"):
        raise ValueError("statistic must be 'mean' or 'max'")
    init = init or InitSpec(position_mean=1.0, position_var=1.0)
    n_steps = int(round(horizon / params.dt))

    args = (obj, params, init, seed, ns, n_ref, n_steps, statistic)
    if n_jobs == 1:
        results = [_repetition(r, *args) for r in range(reps)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_repetition)(r, *args) for r in range(reps))

    per_rep = [[] for _ in ns]
    excluded = np.zeros(len(ns), dtype=int)
    all_match = True
    for samples, same in results:
        all_match &= same
        for j, sample in enumerate(samples):
            if sample is None:
                excluded[j] += 1
            else:
                per_rep[j].append(sample)

    errors = np.full(len(ns), np.nan)
    stderr = np.full(len(ns), np.nan)
    for j, samples in enumerate(per_rep):
        if not samples:
            continue
        arr = np.asarray(samples)
        if statistic == "mean":
            avg = arr.mean(axis=0)
            t_star = int(np.argmax(avg))
            errors[j] = avg[t_star]
            col = arr[:, t_star]
        else:
            errors[j] = arr.mean()
            col = arr
        stderr[j] = col.std(ddof=1) / np.sqrt(col.size) if col.size > 1 else 0.0

    ok = np.isfinite(errors) & (errors > 0)
    slope = halfwidth = np.nan
    if ok.sum() >= 3:
        fit = stats.linregress(np.log(np.asarray(ns)[ok]), np.log(errors[ok]))
        slope = float(fit.slope)
        halfwidth = float(stats.t.ppf(0.975, ok.sum() - 2) * fit.stderr)
    elif ok.sum() == 2:
        x, y = np.log(np.asarray(ns)[ok]), np.log(errors[ok])
        slope = float((y[1] - y[0]) / (x[1] - x[0]))
    return MfaCurve(
        ns=ns, errors=errors, stderr=stderr, reps=reps, slope=slope,
        slope_halfwidth=halfwidth, excluded=excluded, checksums_match=bool(all_match),
        metadata={"n_ref": n_ref, "horizon": horizon, "statistic": statistic},
    )
