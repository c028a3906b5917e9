"""Consensus point and Laplace estimate, stabilized by the ensemble minimum."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WeightedEnsemble:
    """Points with their objective values and the weight exponent ``alpha``."""

    points: np.ndarray
    values: np.ndarray
    alpha: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        if pts.shape[0] == 0 or vals.size == 0:
            raise ValueError("ensemble is empty")
        if pts.shape[0] != vals.size:
            raise ValueError(f"{pts.shape[0]} points but {vals.size} values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("ensemble values must be finite")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)


def _weights(values, alpha):
    # exp(-alpha (v - v_min)): the best point gets weight 1, nothing overflows
    return np.exp(-alpha * (values - values.min()))


def consensus_point(ens, values=None, alpha=None):
    """Weighted mean of the points with weights ``exp(-alpha * value)``.

    Accepts a :class:`WeightedEnsemble` or ``(points, values, alpha)``.
    """
    if not isinstance(ens, WeightedEnsemble):
        ens = WeightedEnsemble(ens, values, alpha)
    w = _weights(ens.values, ens.alpha)
    point = (w @ ens.points) / w.sum()
    # the exact result lies in the convex hull; rounding may step just outside
    return np.clip(point, ens.points.min(axis=0), ens.points.max(axis=0))


def laplace_estimate(values, alpha):
    """``-(1/alpha) log mean(exp(-alpha v))``, computed relative to ``min(v)``.

    The result is clipped to its exact envelope ``[v_min, v_min + log(n)/alpha]``
    to absorb rounding.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("values are empty")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    vmin = v.min()
    est = vmin - np.log(np.mean(_weights(v, alpha))) / alpha
    width = np.log(v.size) / alpha
    est = min(max(est, vmin), vmin + width)
    # step down until the gap to v_min also respects the width after rounding
    while est - vmin > width:
        est = np.nextafter(est, -np.inf)
    return float(est)
