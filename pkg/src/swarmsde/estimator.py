"""Scikit-learn style front end.

``ParticleSwarmMinimizer`` carries the hyperparameters as constructor
arguments (so ``get_params`` / ``set_params`` / ``clone`` work) and ``fit``
minimizes an objective.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .objective import ObjectiveFunction, eval_full, get_benchmark
from .runner import RunConfig, run
from .swarm import InitSpec, SwarmParams


def _check_objective(objective, dim):
    if isinstance(objective, ObjectiveFunction):
        return objective
    if isinstance(objective, str):
        if dim is None:
            raise ValueError("dim is required when the objective is given by name")
        return get_benchmark(objective, dim)
    if callable(objective):
        if dim is None:
            raise ValueError("dim is required for a plain callable objective")

        def func(pts):
            return np.array([objective(p) for p in pts], dtype=float)

        return ObjectiveFunction(dim=int(dim), func=func, name=getattr(objective, "__name__", "custom"))
    raise TypeError(f"cannot use {type(objective).__name__} as an objective")


class ParticleSwarmMinimizer(BaseEstimator):
    """Zero-order global minimizer driven by the particle swarm SDE system.

    Parameters mirror :class:`SwarmParams`, :class:`InitSpec` and
    :class:`RunConfig`; ``horizon`` is the simulated time ``T``.

    Attributes
    ----------
    consensus_ : ndarray
        Final consensus point, the estimate of the minimizer.
    best_value_ : float
        Best objective value seen during the run.
    report_ : RunReport
    n_steps_ : int
    """

    def __init__(self, dim=None, n_particles=100, m=0.2, gamma=None, lambda1=0.0,
                 lambda2=1.0, sigma1=0.0, sigma2=1.0, alpha=100.0, dt=0.01,
                 diffusion="anisotropic", memory="hard", beta=np.inf, theta=0.0,
                 kappa=None, horizon=10.0, batch_size_data=None,
                 batch_size_particles=None, update="full", cooling=False, mu=0.0,
                 init_mean=2.0, init_var=4.0, velocity_var=1.0, record_every=0,
                 random_state=0):
        self.dim = dim
        self.n_particles = n_particles
        self.m = m
        self.gamma = gamma
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.alpha = alpha
        self.dt = dt
        self.diffusion = diffusion
        self.memory = memory
        self.beta = beta
        self.theta = theta
        self.kappa = kappa
        self.horizon = horizon
        self.batch_size_data = batch_size_data
        self.batch_size_particles = batch_size_particles
        self.update = update
        self.cooling = cooling
        self.mu = mu
        self.init_mean = init_mean
        self.init_var = init_var
        self.velocity_var = velocity_var
        self.record_every = record_every
        self.random_state = random_state

    def _config(self, obj):
        params = SwarmParams(
            m=self.m, gamma=self.gamma, lambda1=self.lambda1, lambda2=self.lambda2,
            sigma1=self.sigma1, sigma2=self.sigma2, alpha=self.alpha, beta=self.beta,
            theta=self.theta, kappa=self.kappa, dt=self.dt, diffusion=self.diffusion,
            memory=self.memory, n_particles=self.n_particles, dim=obj.dim,
        )
        init = InitSpec(
            position_mean=self.init_mean, position_var=self.init_var,
            velocity_var=self.velocity_var,
        )
        return RunConfig(
            objective=obj, params=params, init=init, horizon=self.horizon,
            batch_size_data=self.batch_size_data,
            batch_size_particles=self.batch_size_particles, update=self.update,
            cooling=self.cooling, mu=self.mu, record_every=self.record_every,
            seed=int(self.random_state or 0),
        )

    def fit(self, objective, y=None):
        """Minimize ``objective`` (an ObjectiveFunction, benchmark name or callable)."""
        obj = _check_objective(objective, self.dim)
        self.objective_ = obj
        self.report_ = run(self._config(obj))
        self.diverged_ = self.report_.diverged
        self.consensus_ = self.report_.consensus
        self.best_value_ = self.report_.best_value
        self.n_steps_ = self.report_.n_steps
        return self

    def predict(self, X=None):
        """Return the fitted minimizer estimate (``X`` is ignored)."""
        check_is_fitted(self, "report_")
        if self.consensus_ is None:
            raise RuntimeError("the run diverged; no minimizer estimate is available")
        return self.consensus_.copy()

    def score(self, objective=None, y=None):
        """Negative objective value at the estimate (higher is better)."""
        check_is_fitted(self, "report_")
        obj = self.objective_ if objective is None else _check_objective(objective, self.dim)
        return -eval_full(obj, self.predict())
