"""Convergence functionals, well-preparedness checks and success classification.

Expectations over the mean-field law are replaced by particle averages.
"""

import math
from dataclasses import dataclass, field

import numpy as np


def _centered(X):
    return X - X.mean(axis=0)


def empirical_variance(state):
    """Mean squared distance of the positions from their mean."""
    X = state.X if hasattr(state, "X") else np.asarray(state, dtype=float)
    return float(np.mean(np.sum(_centered(X) ** 2, axis=1)))


def h_memoryless(state, params):
    """Particle average of the Lyapunov functional of the memoryless dynamics."""
    c = params.gamma / (2.0 * params.m)
    dx = _centered(state.X)
    V = state.V
    per = c**2 * np.sum(dx**2, axis=1) + np.sum(V**2, axis=1) + c * np.sum(dx * V, axis=1)
    return float(per.mean())


def h_memory(state, params):
    """Particle average of the Lyapunov functional of the memory dynamics."""
    if state.Y is None:
        raise ValueError("h_memory needs local bests")
    g_m = params.gamma / params.m
    c = g_m / 2.0
    dx = _centered(state.X)
    dy = state.X - state.Y
    V = state.V
    per = (
        c**2 * np.sum(dx**2, axis=1)
        + 1.5 * np.sum(V**2, axis=1)
        + 0.5 * (3.0 * params.lambda1 / params.m + g_m**2) * np.sum(dy**2, axis=1)
        + c * np.sum(dx * V, axis=1)
        + g_m * np.sum(dy * V, axis=1)
    )
    return float(per.mean())


def h_functional(state, params):
    return h_memory(state, params) if params.has_memory else h_memoryless(state, params)


def _weight_ratio(values, alpha, min_value):
    """``exp(-alpha E_min) / mean(exp(-alpha v))``, computed in the log domain.

    Returns ``inf`` when the true ratio exceeds the float range.
    """
    v = np.asarray(values, dtype=float)
    vmin = v.min()
    log_ratio = alpha * (vmin - min_value) - math.log(np.mean(np.exp(-alpha * (v - vmin))))
    return math.exp(log_ratio) if log_ratio < 709.0 else math.inf


@dataclass(frozen=True)
class WellPreparednessReport:
    """Quantities of the parameter and initial-datum conditions.

    ``flags`` maps a condition name to ``True`` / ``False``, or ``None`` when
    it could not be evaluated (missing gradient or constants).
    """

    d0: float
    mu: tuple
    chi: float
    flags: dict
    bounds: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v for v in self.flags.values() if v is not None)


def memoryless_parameter_bounds(d, lam, sigma, gamma):
    """Sufficient bounds ``lambda > 4 d sigma^2 / gamma`` and ``m < gamma^2 / (8 d lambda)``."""
    return {"lambda_gt": 4 * d * sigma**2 / gamma, "m_lt": gamma**2 / (8 * d * lam)}


def memory_parameter_bounds(d, params):
    """Sufficient parameter bounds of the memory dynamics for a given ``D^Y``."""
    l1, l2 = params.lambda1, params.lambda2
    s1, s2 = params.sigma1, params.sigma2
    g, kap, th = params.gamma, params.kappa, params.theta
    return {
        "lambda1_gt": 3 * s1**2 / (2 * g),
        "lambda2_gt": 6 * max(d * l1 / 4, (1 + d) * s2**2 / g),
        "kappa_gt": 3 * l2**2 * (1 + d) / (g * th * l1) if th * l1 > 0 else math.inf,
        "m_lt": min(g * th / (16 * kap), l1 * g**2 / (18 * d * l2**2)),
    }


def check_well_prepared_memoryless(params, initial_values, min_value, h0=None,
                                   grad_term=None, hessian_bound=None):
    """Evaluate the parameter conditions for the memoryless dynamics.

    Parameters
    ----------
    params : SwarmParams
    initial_values : array_like
        Objective values at the initial positions.
    min_value : float
        Global minimum of the objective.
    h0, grad_term, hessian_bound : float, optional
        Initial functional, ``mean(exp(-alpha E) <grad E, V>)`` and the Hessian
        bound; with all three the initial-datum condition is checked too.
    """
    lam, sig, g, m = params.lambda2, params.sigma2, params.gamma, params.m
    d0 = 2.0 * _weight_ratio(initial_values, params.alpha, min_value)
    mu = lam * g / (2 * m**2) - (2 * lam**2 / (g * m) + sig**2 / m**2) * 2.0 * d0
    chi = (2.0 / 3.0) * min(g / m, mu) / ((g / (2 * m)) ** 2 + 1)
    # doubled D0 keeps the condition valid over the whole run
    bounds = memoryless_parameter_bounds(2 * d0, lam, sig, g)
    flags = {
        "mu_positive": bool(mu > 0),
        "lambda_bound": bool(lam > bounds["lambda_gt"]),
        "m_bound": bool(m < bounds["m_lt"]),
        "initial_datum": None,
    }
    if h0 is not None and grad_term is not None and hessian_bound is not None and chi > 0:
        ev = np.asarray(initial_values, dtype=float)
        mean_w = np.mean(np.exp(-params.alpha * (ev - min_value)))
        if chi < g / m:
            lhs = (m * params.alpha / (2 * g)) * max(grad_term, 0.0) + (
                params.alpha * hessian_bound / (chi * (g / m - chi))
            ) * (1 + 8 * m * lam / g**2) * h0 / mean_w**2
            flags["initial_datum"] = bool(lhs < 3.0 / 16.0)
    return WellPreparednessReport(d0=d0, mu=(mu,), chi=chi, flags=flags, bounds=bounds)


def check_well_prepared_memory(params, initial_local_best_values, min_value):
    """Evaluate the parameter conditions for the dynamics with local bests."""
    l1, l2 = params.lambda1, params.lambda2
    s1, s2 = params.sigma1, params.sigma2
    g, m, kap, th = params.gamma, params.m, params.kappa, params.theta
    ratio = _weight_ratio(initial_local_best_values, params.alpha, min_value)
    d0 = 12.0 * ratio
    common = 9 * l2**2 / (g * m) + 3 * s2**2 / m**2
    mu1 = (l1 + 2 * l2) * g / (2 * m) ** 2 - (common + 3 * l1 * g / (4 * m**2)) * 12.0 * ratio
    if l1 > 0:
        mu2 = (
            (l1 + l2) * g / m**2
            + kap * th * (3 * l1 / m + g**2 / m**2)
            - 8 * kap**2 * g / m
            - l2**2 * g / (2 * m**2 * l1)
            - 3 * s1**2 / (2 * m**2)
            - common
            - (common + 3 * l1 * g / (2 * m) ** 2) * 24.0 * ratio
        )
    else:
        mu2 = -math.inf
    denom = (g / (2 * m)) ** 2 + 1 + 3 * l1 / m + 2 * (g / m) ** 2
    chi = (2.0 / 5.0) * min(g / (2 * m), mu1, mu2) / denom
    bounds = memory_parameter_bounds(2 * d0, params)
    flags = {
        "mu1_positive": bool(mu1 > 0),
        "mu2_positive": bool(mu2 > 0),
        "lambda1_bound": bool(l1 > bounds["lambda1_gt"]),
        "lambda2_bound": bool(l2 > bounds["lambda2_gt"]),
        "kappa_bound": bool(kap > bounds["kappa_gt"]),
        "m_bound": bool(m < bounds["m_lt"]),
        "initial_datum": None,
    }
    return WellPreparednessReport(d0=d0, mu=(mu1, mu2), chi=chi, flags=flags, bounds=bounds)


def classify_success(final_consensus, minimizer, tol=0.25, diverged=False):
    """True iff the consensus is within ``tol`` of the minimizer in the max-norm."""
    if diverged or final_consensus is None:
        return False
    a = np.asarray(final_consensus, dtype=float)
    b = np.asarray(minimizer, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return bool(np.max(np.abs(a - b)) < tol)
