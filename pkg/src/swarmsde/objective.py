"""Objective functions, including sum-structured (mini-batchable) ones.

Evaluators are vectorized: they take an ``(n, d)`` array of points and return
``n`` values. Sum-structured objectives additionally expose a term evaluator
``terms(points, indices) -> (n, len(indices))`` so that a data batch can be
evaluated without touching the other terms. Term indices are 0-based.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng as _rng


@dataclass(frozen=True)
class ObjectiveFunction:
    """A real-valued objective on ``R^dim``.

    Parameters
    ----------
    dim : int
        Dimension of the search space.
    func : callable, optional
        Vectorized full evaluator. May be omitted for sum-structured
        objectives, in which case the mean over all terms is used.
    n_terms : int, optional
        Number of terms ``M`` of a sum-structured objective.
    terms : callable, optional
        ``terms(points, indices)`` returning per-term values of shape
        ``(n, len(indices))``.
    minimizer : array_like, optional
        Known global minimizer.
    minimum : float, optional
        Known minimum value.
    name : str
        Label used in reports.
    """

    dim: int
    func: Optional[Callable] = None
    n_terms: Optional[int] = None
    terms: Optional[Callable] = None
    minimizer: Optional[np.ndarray] = None
    minimum: Optional[float] = None
    name: str = "custom"
    gradient: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.func is None and self.terms is None:
            raise ValueError("either func or terms must be given")
        if (self.terms is None) != (self.n_terms is None):
            raise ValueError("terms and n_terms must be given together")
        if self.n_terms is not None and int(self.n_terms) < 1:
            raise ValueError(f"n_terms must be positive, got {self.n_terms}")
        if self.minimizer is not None:
            x = np.asarray(self.minimizer, dtype=float)
            if x.shape != (self.dim,):
                raise ValueError("minimizer has the wrong dimension")
            object.__setattr__(self, "minimizer", x)

    @property
    def sum_structured(self):
        return self.terms is not None

    def __call__(self, x):
        return eval_full(self, x)


@dataclass(frozen=True)
class DataBatchPlan:
    """A partition of the term indices ``0..M-1`` into equal batches."""

    n_terms: int
    batch_size: int
    batches: tuple

    def __len__(self):
        return len(self.batches)


def _as_points(obj, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.ndim != 2 or pts.shape[1] != obj.dim:
        raise ValueError(f"expected points of dimension {obj.dim}, got shape {x.shape}")
    return pts, single


def eval_full(obj, x):
    """Evaluate the full objective at one point (``(d,)``) or many (``(n, d)``)."""
    pts, single = _as_points(obj, x)
    if obj.func is not None:
        vals = np.asarray(obj.func(pts), dtype=float)
    else:
        vals = obj.terms(pts, np.arange(obj.n_terms)).mean(axis=1)
    return float(vals[0]) if single else vals


def eval_batch(obj, x, batch):
    """Mean of the terms listed in ``batch``."""
    if not obj.sum_structured:
        raise TypeError(f"objective {obj.name!r} is not sum-structured")
    idx = np.asarray(batch, dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("batch is empty")
    if idx.min() < 0 or idx.max() >= obj.n_terms:
        raise ValueError(f"batch indices must lie in [0, {obj.n_terms})")
    pts, single = _as_points(obj, x)
    vals = obj.terms(pts, idx).mean(axis=1)
    return float(vals[0]) if single else vals


def batch_evaluator(obj, batch=None):
    """Vectorized evaluator for a batch, or the full objective if ``batch`` is None."""
    if batch is None:
        return lambda pts: eval_full(obj, np.atleast_2d(pts))
    return lambda pts: eval_batch(obj, np.atleast_2d(pts), batch)


def make_data_batches(n_terms, batch_size, seed, epoch=0):
    """Randomly partition ``0..n_terms-1`` into batches of ``batch_size``.

    The permutation is drawn from the counter-based stream addressed by
    ``(seed, epoch)``, so the same arguments always give the same plan.
    """
    n_terms, batch_size = int(n_terms), int(batch_size)
    if n_terms < 1 or batch_size < 1:
        raise ValueError("n_terms and batch_size must be positive")
    if n_terms % batch_size:
        raise ValueError(f"batch size {batch_size} does not divide {n_terms}")
    perm = _rng.generator(seed, _rng.LANE_DATA, epoch).permutation(n_terms)
    batches = tuple(np.sort(b) for b in perm.reshape(-1, batch_size))
    return DataBatchPlan(n_terms, batch_size, batches)


def _rastrigin(pts):
    return np.sum(pts**2 + 2.5 * (1.0 - np.cos(2.0 * np.pi * pts)), axis=1)


def _rastrigin_grad(pts):
    return 2.0 * pts + 5.0 * np.pi * np.sin(2.0 * np.pi * pts)


def make_rastrigin(dim):
    """Rastrigin benchmark ``sum v_k^2 + 5/2 (1 - cos(2 pi v_k))``, minimum 0 at 0."""
    dim = int(dim)
    if dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim}")
    return ObjectiveFunction(
        dim=dim, func=_rastrigin, minimizer=np.zeros(dim), minimum=0.0,
        name="rastrigin", gradient=_rastrigin_grad,
    )


def make_sphere(dim):
    """Sphere ``|x|^2``."""
    dim = int(dim)
    if dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim}")
    return ObjectiveFunction(
        dim=dim, func=lambda pts: np.sum(pts**2, axis=1), minimizer=np.zeros(dim),
        minimum=0.0, name="sphere", gradient=lambda pts: 2.0 * pts,
    )


_BENCHMARKS = {"rastrigin": make_rastrigin, "sphere": make_sphere}


def get_benchmark(name, dim):
    try:
        factory = _BENCHMARKS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown benchmark {name!r}; choose from {sorted(_BENCHMARKS)}"
        ) from None
    return factory(dim)


def make_sum_objective(term_funcs, dim, minimizer=None, minimum=None, name="sum"):
    """Build a sum-structured objective from a list of scalar term callables.

    Each callable maps a ``(d,)`` vector to a float. This is the convenient
    (not the fast) route; pass a vectorized ``terms`` to
    :class:`ObjectiveFunction` for real workloads.
    """
    funcs = tuple(term_funcs)
    if not funcs:
        raise ValueError("need at least one term")

    def terms(pts, idx):
        return np.array([[funcs[j](p) for j in idx] for p in pts], dtype=float)

    return ObjectiveFunction(
        dim=dim, n_terms=len(funcs), terms=terms, minimizer=minimizer,
        minimum=minimum, name=name,
    )


def make_least_squares(A, b, name="least_squares"):
    """Mean squared residual ``(1/M) sum_j (a_j . x - b_j)^2``, one term per row."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ValueError("A must be (M, d) and b must be (M,)")

    def terms(pts, idx):
        return (pts @ A[idx].T - b[idx]) ** 2

    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = A @ sol - b
    return ObjectiveFunction(
        dim=A.shape[1], n_terms=A.shape[0], terms=terms, minimizer=sol,
        minimum=float(np.mean(resid**2)), name=name,
    )
