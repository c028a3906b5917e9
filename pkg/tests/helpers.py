"""Small constructors shared by the test modules."""

import numpy as np

from swarmsde import SwarmState
from swarmsde.rng import NoiseSource


def make_state(X, V=None, Y=None, values=None, dt=0.01, seed=0, k=0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    V = np.zeros_like(X) if V is None else np.atleast_2d(np.asarray(V, dtype=float)).copy()
    if Y is not None:
        Y = np.atleast_2d(np.asarray(Y, dtype=float)).copy()
        values = np.zeros(n) if values is None else np.asarray(values, dtype=float).copy()
    return SwarmState(X=X.copy(), V=V, Y=Y, values=values, ids=np.arange(n),
                      noise=NoiseSource(seed, n, d), k=k, dt=dt)
