import math

import numpy as np
import pytest
from helpers import make_state
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmsde import (
    DivergenceError, InitSpec, StepContext, SwarmParams, init_swarm, make_rastrigin,
    make_sphere, smoothed_switch, step_memory, step_memoryless, update_local_best,
)
from swarmsde.objective import batch_evaluator


def p1d(**kw):
    base = dict(m=1.0, gamma=0.0, lambda2=1.0, sigma2=0.0, dt=0.1, n_particles=1, dim=1,
                memory="off")
    base.update(kw)
    return SwarmParams(**base)


class TestStepMemoryless:
    def test_pure_friction(self):
        p = p1d(m=0.3, gamma=0.7, lambda2=1e-300, sigma2=0.0)
        s = make_state([[0.0]], V=[[2.0]], dt=0.1)
        out = step_memoryless(s, p, StepContext(np.array([0.0])))
        assert out.V[0, 0] == pytest.approx(0.3 / (0.3 + 0.07) * 2.0, rel=1e-15)

    def test_at_consensus_is_still(self):
        p = p1d(sigma2=5.0, m=0.2, gamma=0.8)
        s = make_state([[1.5]], dt=0.1, seed=3)
        out = step_memoryless(s, p, StepContext(np.array([1.5])))
        assert out.V[0, 0] == 0.0 and out.X[0, 0] == 1.5

    def test_hand_step(self):
        out = step_memoryless(make_state([[0.0]], dt=0.1), p1d(), StepContext(np.array([1.0])))
        assert out.V[0, 0] == pytest.approx(0.1, rel=1e-15)
        assert out.X[0, 0] == pytest.approx(0.01, rel=1e-15)
        assert out.k == 1

    def test_input_not_mutated(self):
        s = make_state([[0.0]], dt=0.1)
        step_memoryless(s, p1d(), StepContext(np.array([1.0])))
        assert s.X[0, 0] == 0.0 and s.k == 0

    def test_noise_oracle(self):
        p = SwarmParams(m=0.2, gamma=0.8, lambda2=1.0, sigma2=2.0, dt=0.01, n_particles=3,
                        dim=2, memory="off", diffusion="isotropic")
        s = make_state(np.arange(6.0).reshape(3, 2), V=np.ones((3, 2)), dt=0.01, seed=9)
        c = np.array([0.5, -0.5])
        out = step_memoryless(s, p, StepContext(c))
        B = s.noise.normals(0, 2)
        z = c - s.X
        expect = (0.2 * s.V + 0.01 * z + 0.1 * 2.0 * np.linalg.norm(z, axis=1)[:, None] * B) / (
            0.2 + 0.01 * 0.8)
        np.testing.assert_allclose(out.V, expect, rtol=1e-14)
        np.testing.assert_allclose(out.X, s.X + 0.01 * expect, rtol=1e-14)

    def test_partial_update(self):
        p = SwarmParams(m=0.2, sigma2=1.0, n_particles=4, dim=2, memory="off")
        s = make_state(np.ones((4, 2)), dt=0.01, seed=1)
        out = step_memoryless(s, p, StepContext(np.zeros(2), active=np.array([1, 3])))
        np.testing.assert_array_equal(out.X[[0, 2]], s.X[[0, 2]])
        assert not np.array_equal(out.X[[1, 3]], s.X[[1, 3]])
        assert out.k == 1

    def test_partial_noise_matches_full_rows(self):
        p = SwarmParams(m=0.2, sigma2=1.0, n_particles=4, dim=2, memory="off")
        s = make_state(np.arange(8.0).reshape(4, 2), dt=0.01, seed=1)
        full = step_memoryless(s, p, StepContext(np.zeros(2)))
        part = step_memoryless(s, p, StepContext(np.zeros(2), active=np.array([2])))
        np.testing.assert_array_equal(full.X[2], part.X[2])

    @pytest.mark.parametrize("active", [np.array([], dtype=int), np.array([4]), np.array([-1])])
    def test_bad_active(self, active):
        p = SwarmParams(n_particles=4, dim=2, memory="off")
        with pytest.raises(ValueError):
            step_memoryless(make_state(np.zeros((4, 2))), p, StepContext(np.zeros(2), active=active))

    def test_divergence(self):
        p = p1d(lambda2=1.0)
        s = make_state([[0.0]], V=[[1e300]], dt=0.1, k=17)
        with pytest.raises(DivergenceError) as err:
            step_memoryless(s, p, StepContext(np.array([0.0])))
        assert err.value.step == 17

    def test_rejects_memory_params(self):
        with pytest.raises(ValueError):
            step_memoryless(make_state([[0.0]]), SwarmParams(dim=1, n_particles=1),
                            StepContext(np.zeros(1)))


class TestStepMemory:
    def test_hand_step(self):
        p = SwarmParams(m=1.0, gamma=0.0, dt=0.1, lambda1=1.0, lambda2=1.0, sigma1=0.0,
                        sigma2=0.0, n_particles=1, dim=1)
        s = make_state([[0.0]], Y=[[1.0]], values=[0.0], dt=0.1)
        out = step_memory(s, p, StepContext(np.array([2.0]), evaluator=lambda x: x[:, 0] ** 2))
        assert out.V[0, 0] == pytest.approx(0.3, rel=1e-15)
        assert out.X[0, 0] == pytest.approx(0.03, rel=1e-15)

    def test_reduces_to_memoryless(self, rng):
        obj = make_rastrigin(3)
        pm = SwarmParams(m=0.3, sigma2=1.5, n_particles=8, dim=3, lambda1=0.0, sigma1=0.0)
        po = pm.with_updates(memory="off")
        X, V, Y = rng.normal(size=(8, 3)), rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
        a = make_state(X, V, Y=Y, values=obj(Y), seed=4)
        b = make_state(X, V, seed=4)
        c = rng.normal(size=3)
        for _ in range(5):
            a = step_memory(a, pm, StepContext(c, batch_evaluator(obj)))
            b = step_memoryless(b, po, StepContext(c))
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.V, b.V)

    def test_collapsed_fixed_point(self):
        p = SwarmParams(m=0.2, lambda1=0.4, sigma1=3.0, sigma2=3.0, n_particles=5, dim=2)
        pt = np.array([0.3, -1.0])
        X = np.tile(pt, (5, 1))
        s = make_state(X, Y=X, values=np.full(5, 1.0), seed=2)
        out = step_memory(s, p, StepContext(pt, evaluator=lambda x: np.ones(len(x))))
        np.testing.assert_array_equal(out.X, X)
        np.testing.assert_array_equal(out.V, 0)
        np.testing.assert_array_equal(out.Y, X)

    def test_needs_evaluator(self):
        p = SwarmParams(n_particles=1, dim=1)
        s = make_state([[0.0]], Y=[[0.0]])
        with pytest.raises(ValueError):
            step_memory(s, p, StepContext(np.zeros(1)))


class TestSmoothedSwitch:
    def test_equal(self):
        assert smoothed_switch(2.0, 2.0, 3.0, 0.5) == 1.5

    def test_saturation(self):
        assert smoothed_switch(0.0, 1.0, 1e9, 0.2) == pytest.approx(2.2, abs=1e-12)

    def test_value(self):
        assert smoothed_switch(1.0, 0.0, 1.0, 0.0) == pytest.approx(1 - math.tanh(1), rel=1e-14)
        assert smoothed_switch(1.0, 0.0, 1.0, 0.0) == pytest.approx(0.23840, abs=1e-5)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1e-3, 10), st.floats(0, 3))
    def test_open_range(self, ex, ey, beta, theta):
        s = smoothed_switch(ex, ey, beta, theta)
        assert theta <= s <= 2 + theta
        if abs(beta * (ey - ex)) < 5:
            assert theta < s < 2 + theta


class TestUpdateLocalBest:
    def ctx(self, value):
        return StepContext(np.zeros(1), evaluator=lambda x: np.full(len(x), value))

    def test_improvement_replaces(self):
        s = make_state([[1.0]], Y=[[2.0]], values=[5.0])
        out = update_local_best(s, SwarmParams(n_particles=1, dim=1), self.ctx(3.0))
        assert out.Y[0, 0] == 1.0 and out.values[0] == 3.0

    def test_tie_keeps(self):
        s = make_state([[1.0]], Y=[[2.0]], values=[5.0])
        out = update_local_best(s, SwarmParams(n_particles=1, dim=1), self.ctx(5.0))
        assert out.Y[0, 0] == 2.0 and out.values[0] == 5.0

    def test_soft_saturates_to_hard(self):
        dt = 0.01
        p = SwarmParams(n_particles=1, dim=1, memory="soft", kappa=1 / (2 * dt), theta=0.0,
                        beta=1e9, dt=dt)
        s = make_state([[1.0]], Y=[[2.0]], values=[5.0], dt=dt)
        out = update_local_best(s, p, StepContext(np.zeros(1), evaluator=lambda x: x[:, 0] ** 2))
        assert out.Y[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert out.values[0] == pytest.approx(1.0, abs=1e-9)

    def test_soft_worse_point_stays(self):
        dt = 0.01
        p = SwarmParams(n_particles=1, dim=1, memory="soft", kappa=1 / (2 * dt), beta=1e9, dt=dt)
        s = make_state([[3.0]], Y=[[2.0]], values=[4.0], dt=dt)
        out = update_local_best(s, p, StepContext(np.zeros(1), evaluator=lambda x: x[:, 0] ** 2))
        assert out.Y[0, 0] == pytest.approx(2.0, abs=1e-9)


def test_hard_monotone_along_run():
    obj = make_rastrigin(5)
    p = SwarmParams(m=0.2, lambda1=0.4, sigma1=0.8, sigma2=2.0, n_particles=30, dim=5)
    state = init_swarm(p, InitSpec(seed=5), obj)
    ev = batch_evaluator(obj)
    from swarmsde import consensus_point

    for _ in range(300):
        prev = state.values.copy()
        c = consensus_point(state.Y, state.values, p.alpha)
        state = step_memory(state, p, StepContext(c, ev))
        assert np.all(state.values <= prev)
        np.testing.assert_array_equal(state.values, obj(state.Y))


def deterministic_final(dt, T=1.0):
    obj = make_sphere(2)
    p = SwarmParams(m=0.5, gamma=0.5, lambda2=1.0, sigma2=0.0, alpha=1.0, dt=dt,
                    n_particles=10, dim=2, memory="off")
    state = init_swarm(p, InitSpec(seed=3, position_mean=1.0, position_var=1.0))
    from swarmsde import consensus_point

    for _ in range(int(round(T / dt))):
        state = step_memoryless(state, p, StepContext(consensus_point(state.X, obj(state.X), p.alpha)))
    return state.X


def test_deterministic_order():
    ref = deterministic_final(0.1 / 64)
    errs = [np.max(np.abs(deterministic_final(h) - ref)) for h in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 0.85)
