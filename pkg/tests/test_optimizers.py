import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dictopt import optimizers as O
from dictopt.errors import ContractError, DivergedError, NumericFailure


class LeastSquares(O.GradientOracle):
    """``sum_i 0.5 * (a_i . x - b_i)^2`` split over rows."""

    def __init__(self, A, b):
        self.A, self.b = np.asarray(A, float), np.asarray(b, float)
        self.n_samples = self.A.shape[0]

    def batch_gradient(self, x, idx):
        A, b = (self.A, self.b) if idx is None else (self.A[idx], self.b[idx])
        return A.T @ (A @ x - b)


class HalfNorm(O.GradientOracle):
    n_samples = 1

    def batch_gradient(self, x, idx):
        return np.asarray(x, float)


def _problem(seed=0, m=30, n=4):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    return LeastSquares(A, rng.standard_normal(m))


def test_gd_listed_examples():
    assert np.allclose(O.gd_step(np.array([3.0, -2.0]), HalfNorm(), 1.0), 0.0)
    assert O.gd_step(np.array([1.0]), HalfNorm(), 0.5)[0] == 0.5


def test_gd_converges_monotonically_to_pinv_solution():
    prob = _problem()
    h = 1.0 / np.linalg.eigvalsh(prob.A.T @ prob.A).max()
    x = np.zeros(4)
    target = np.linalg.pinv(prob.A) @ prob.b
    prev = np.inf
    for _ in range(3000):
        x = O.gd_step(x, prob, h)
        r = np.sum((prob.A @ x - prob.b) ** 2)
        assert r <= prev + 1e-12
        prev = r
    assert np.allclose(x, target, atol=1e-8)


def test_step_rejects_bad_inputs():
    with pytest.raises(ContractError):
        O.gd_step(np.zeros(2), HalfNorm(), 0.0)

    class Bad(O.GradientOracle):
        n_samples = 1

        def batch_gradient(self, x, idx):
            return np.array([np.nan])

    with pytest.raises(NumericFailure):
        O.gd_step(np.zeros(1), Bad(), 0.1)
    with pytest.raises(ContractError):
        O.draw_batch(np.random.default_rng(0), 5, 0)


def test_sgd_full_batch_is_bit_identical_to_gd():
    prob = _problem(1)
    rng = np.random.default_rng(0)
    x_gd = x_sgd = np.ones(4)
    for _ in range(100):
        x_gd = O.gd_step(x_gd, prob, 0.01)
        x_sgd = O.sgd_step(x_sgd, prob, 0.01, prob.n_samples, rng)
        assert np.array_equal(x_gd, x_sgd)


def test_sgd_batches_are_reproducible():
    a = [O.draw_batch(np.random.default_rng(5), 20, 4) for _ in range(1)]
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    for _ in range(10):
        assert np.array_equal(O.draw_batch(r1, 20, 4), O.draw_batch(r2, 20, 4))
    assert a[0].size == 4 and len(set(a[0])) == 4


def test_sgd_expected_direction_is_full_gradient():
    prob = _problem(2, m=3, n=2)
    x = np.array([0.3, -0.7])
    batches = list(itertools.combinations(range(3), 2))
    mean = np.mean([prob.batch_gradient(x, np.array(b)) for b in batches], axis=0)
    # each sample appears in 2 of the 3 batches of size 2
    assert np.allclose(mean, prob.full_gradient(x) * 2 / 3)


def test_nesterov_p_sequence():
    state = O.NesterovState()
    ps = []
    for _ in range(3):
        state, _ = O.nesterov_step(state, np.zeros(1), HalfNorm(), 0.1)
        ps.append(state.p)
    assert ps[0] == 1.0
    assert np.isclose(ps[1], (1 + np.sqrt(5)) / 2, rtol=0, atol=1e-15)
    expected = 0.5 * (1 + np.sqrt(1 + 4 * ps[1] ** 2))
    # frozen from the recurrence: 0.5 * (1 + sqrt(1 + 4 * phi**2))
    assert ps[2] == expected and np.isclose(ps[2], 2.1935271, atol=1e-7)
    assert np.all(np.diff(ps) > 0)


def test_nesterov_first_step_is_gd():
    prob = _problem(3)
    x0 = np.ones(4)
    _, x1 = O.nesterov_step(O.NesterovState(), x0, prob, 0.01)
    assert np.array_equal(x1, O.gd_step(x0, prob, 0.01))


def test_nesterov_beats_gd_on_quadratic():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((40, 8)) @ np.diag(np.linspace(0.2, 3, 8))
    prob = LeastSquares(A, rng.standard_normal(40))
    h = 1.0 / np.linalg.eigvalsh(A.T @ A).max()
    target = np.linalg.lstsq(A, prob.b, rcond=None)[0]

    def iters(method):
        x, state = np.zeros(8), O.NesterovState()
        for t in range(1, 200_000):
            if method == "gd":
                x = O.gd_step(x, prob, h)
            else:
                state, x = O.nesterov_step(state, x, prob, h)
            if np.linalg.norm(x - target) < 1e-8:
                return t
        return None

    gd, nest = iters("gd"), iters("nesterov")
    assert nest is not None and gd is not None and nest < gd


def test_adam_listed_examples():
    state = O.AdamState.zeros_like(np.zeros(3))
    x = np.array([1.0, 2.0, 3.0])
    for _ in range(5):
        state, x2 = O.adam_step(state, x, np.zeros(3), 0.1)
        assert np.array_equal(x2, x)
    g = np.array([0.5, -2.0, 1e-3])
    state, x1 = O.adam_step(O.AdamState.zeros_like(g), np.zeros(3), g, 0.01)
    assert np.allclose(x1, -0.01 * g / (np.abs(g) + 1e-8))
    assert np.allclose(x1, -0.01 * np.sign(g), atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-4, 1.0))
def test_adam_odd_symmetry_and_bounded_steps(seed, h):
    rng = np.random.default_rng(seed)
    grads = rng.standard_normal((20, 4)) * rng.uniform(0.01, 100, 4)
    sp, sn = O.AdamState.zeros_like(np.zeros(4)), O.AdamState.zeros_like(np.zeros(4))
    xp = xn = np.zeros(4)
    for g in grads:
        sp, xp2 = O.adam_step(sp, xp, g, h)
        sn, xn2 = O.adam_step(sn, xn, -g, h)
        # |m_hat| <= sqrt(v_hat) for beta1^2 <= beta2; the bound is loose up to a small factor
        assert np.all(np.abs(xp2 - xp) <= h * (1 - 0.9) / np.sqrt(1 - 0.999) * 1.0001)
        xp, xn = xp2, xn2
        assert np.array_equal(xp, -xn)
    assert np.all(sp.v >= 0) and sp.t == 20


def test_default_step_size_examples():
    assert O.default_step_size(np.eye(2)) == 1.0
    assert np.isclose(O.default_step_size(np.diag([2.0, 1.0])), 0.25)
    P = np.random.default_rng(0).standard_normal((5, 50))
    assert np.isclose(O.default_step_size(P), 1 / np.linalg.svd(P, compute_uv=False)[0] ** 2)
    with pytest.raises(ContractError):
        O.default_step_size(np.zeros((2, 3)))


def test_alternating_adam_decoupled_quadratics():
    A, w, hist = O.alternating_adam(np.ones((2, 2)), np.ones(3), lambda A, w: A, lambda A, w: w,
                                    O.OptimizerConfig(max_iters=3000, step_size=0.01),
                                    lambda A, w: 0.5 * np.sum(A * A), lambda A, w: 0.5 * np.sum(w * w),
                                    stop_on_plateau=False)
    assert np.max(np.abs(A)) < 1e-2 and np.max(np.abs(w)) < 1e-2
    assert len(hist) == 3001 and hist[-1].loss_1 < hist[0].loss_1


def test_alternating_adam_frozen_w_matches_single_block_adam():
    prob = _problem(6)
    cfg = O.OptimizerConfig(max_iters=50, step_size=0.05)
    x0 = np.zeros(4)
    A, w, _ = O.alternating_adam(x0, np.ones(2), lambda A, w: prob.full_gradient(A),
                                 lambda A, w: np.zeros(2), cfg, stop_on_plateau=False)
    ref, _ = O.run_single_block(x0, prob, "adam", 0.05, 50, cfg)
    assert np.array_equal(A, ref)
    assert np.array_equal(w, np.ones(2))


def test_alternating_adam_order_uses_updated_w():
    seen = []

    def grad_A(A, w):
        seen.append(w.copy())
        return np.zeros_like(A)

    O.alternating_adam(np.zeros(1), np.zeros(1), grad_A, lambda A, w: np.ones(1),
                       O.OptimizerConfig(max_iters=2, step_size=0.1), stop_on_plateau=False)
    # the first A-gradient already sees w_1 = w_0 - h * sign(1)
    assert np.isclose(seen[0][0], -0.1)


def test_alternating_adam_zero_gradients_fixed_point():
    A0, w0 = np.arange(4.0).reshape(2, 2), np.array([0.5])
    A, w, hist = O.alternating_adam(A0, w0, lambda A, w: np.zeros_like(A), lambda A, w: np.zeros_like(w),
                                    O.OptimizerConfig(max_iters=10), stop_on_plateau=False)
    assert np.array_equal(A, A0) and np.array_equal(w, w0)


def test_alternating_adam_divergence_reports_iteration():
    with pytest.raises(DivergedError) as info:
        O.alternating_adam(np.ones(1), np.ones(1), lambda A, w: -A, lambda A, w: -w,
                           O.OptimizerConfig(max_iters=10_000, step_size=1.0),
                           lambda A, w: float(np.exp(abs(A[0]))), stop_on_plateau=False)
    err = info.value
    assert err.iteration > 0 and err.history[-1].iteration == err.iteration


def test_plateau_and_tolerance_stops():
    _, _, hist = O.alternating_adam(np.zeros(1), np.zeros(1), lambda A, w: np.zeros(1),
                                    lambda A, w: np.zeros(1), O.OptimizerConfig(max_iters=500),
                                    lambda A, w: 1.0, lambda A, w: 2.0)
    assert hist[-1].iteration == O.PLATEAU_WINDOW
    _, _, hist = O.alternating_adam(np.zeros(1), np.zeros(1), lambda A, w: np.zeros(1),
                                    lambda A, w: np.zeros(1), O.OptimizerConfig(max_iters=500, tolerance=1e-3))
    assert hist[-1].iteration == 1


def test_determinism_with_seed():
    prob = _problem(7)
    cfg = O.OptimizerConfig(batch_size=5, seed=11)
    a, _ = O.run_single_block(np.zeros(4), prob, "sgd", 0.01, 100, cfg)
    b, _ = O.run_single_block(np.zeros(4), prob, "sgd", 0.01, 100, cfg)
    assert np.array_equal(a, b)


def test_config_validation():
    for bad in (dict(step_size=0), dict(beta1=1.0), dict(epsilon=0), dict(batch_size=0), dict(max_iters=-1)):
        with pytest.raises(ContractError):
            O.OptimizerConfig(**bad)


def test_clip_norm_limits_gradient():
    cfg = O.OptimizerConfig(max_iters=1, step_size=1.0, clip_norm=1.0, beta1=0.0, beta2=0.0)
    _, _, hist = O.alternating_adam(np.zeros(2), np.zeros(0), lambda A, w: np.array([30.0, 40.0]),
                                    lambda A, w: w, cfg, stop_on_plateau=False)
    assert np.isclose(hist[-1].grad_norm_A, 1.0)
