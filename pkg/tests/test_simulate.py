import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dictopt import simulate as sim
from dictopt.errors import BlowUpError, ConfigurationError, ContractError
from dictopt.presets import generate


def _spec(drift, diffusion, dim=1):
    return sim.SdeSpec(drift, diffusion, dim)


def test_em_deterministic_contraction_is_explicit_euler():
    traj = sim.euler_maruyama(_spec(lambda x: -x, 0.0), [1.0], 0.1, 20, seed=0)
    assert np.allclose(traj[:, 0], 0.9 ** np.arange(21), rtol=1e-14, atol=0)


def test_em_pure_noise_increment_variance():
    eta = 0.01
    traj = sim.euler_maruyama(_spec(lambda x: 0 * x, 1.0), [0.0], eta, 100_000, seed=1)
    inc = np.diff(traj[:, 0])
    assert abs(inc.var() / eta - 1) < 0.05


def test_em_ou_stationary_variance():
    spec = sim.ou_process(1.0, 4.0)
    X0 = np.random.default_rng(2).normal(0, 0.5, (1, 2000))
    traj = sim.euler_maruyama(spec, X0, 1e-2, 500, seed=3, record_stride=500)
    assert abs(traj[-1].var() / 0.25 - 1) < 0.1


def test_em_determinism_and_blowup():
    spec = sim.ou_process()
    a = sim.euler_maruyama(spec, [0.3], 1e-3, 200, seed=9)
    b = sim.euler_maruyama(spec, [0.3], 1e-3, 200, seed=9)
    assert np.array_equal(a, b)
    with pytest.raises(BlowUpError) as info:
        sim.euler_maruyama(_spec(lambda x: x * x, 0.0), [10.0], 1.0, 100)
    assert info.value.step > 0
    with pytest.raises(ContractError):
        sim.euler_maruyama(spec, [0.0], 0.0, 10)


def test_subsample_pairs_examples():
    traj = np.arange(11.0)[:, None]
    d = sim.subsample_pairs(traj, 0.1, 0.1, stride=1)
    assert np.array_equal(d.Y - d.X, np.ones((1, 10)))
    d = sim.subsample_pairs(traj, 0.3, 0.1)
    assert d.X.shape[1] == int(np.floor(10 * 0.1 / 0.3 + 1e-12))
    assert np.array_equal(d.X[0], [0, 3, 6])
    const = sim.subsample_pairs(np.ones((20, 2)), 0.2, 0.1)
    assert np.array_equal(const.X, const.Y)
    with pytest.raises(ContractError):
        sim.subsample_pairs(traj, 0.25, 0.1)


def test_rk4_examples():
    const = sim.OdeSpec(lambda x: 0 * x, 2)
    traj, der = sim.rk4_integrate(const, [1.0, -2.0], 0.1, 10)
    assert np.all(traj == [1.0, -2.0]) and np.all(der == 0)
    eta = 0.1
    traj, der = sim.rk4_integrate(sim.OdeSpec(lambda x: -x, 1), [2.0], eta, 1)
    assert np.isclose(traj[1, 0], 2.0 * (1 - eta + eta**2 / 2 - eta**3 / 6 + eta**4 / 24), rtol=1e-15)
    assert np.allclose(der[:, 0], -traj[:, 0])


def test_rk4_harmonic_energy_drift():
    osc = sim.OdeSpec(lambda x: np.stack([x[1], -x[0]]), 2)
    traj, _ = sim.rk4_integrate(osc, [1.0, 0.0], 0.01, 10_000)
    energy = np.sum(traj**2, axis=1)
    assert abs(energy[-1] / energy[0] - 1) < 1e-6


def test_rk4_fourth_order():
    f = sim.OdeSpec(lambda x: -x, 1)

    def err(eta):
        traj, _ = sim.rk4_integrate(f, [1.0], eta, int(round(1 / eta)))
        return abs(traj[-1, 0] - np.exp(-1.0))

    assert err(0.1) / err(0.05) >= 12


def test_chua_examples():
    spec = sim.chua_system()
    x = np.array([[0.0, 0.5, 1.3], [0.7, 0.0, 0.0], [0.2, 0.4, 0.0]])
    rhs = spec.rhs(x)
    assert np.isclose(rhs[0, 0], 10.2 * 0.7)
    assert np.isclose(rhs[2, 1], 0.0)
    assert np.isclose(rhs[0, 2], 1.122, rtol=1e-12)
    with pytest.raises(ContractError):
        sim.chua_system(a=0)


def test_triple_well_values_and_gradient():
    v = sim.triple_well_potential(0.0, 1 / 3)
    assert np.isclose(v, 3 - 3 * np.exp(-16 / 9) - 10 * np.exp(-(1 + 1 / 9)), rtol=1e-14)
    rng = np.random.default_rng(4)
    x1, x2 = rng.uniform(-2, 2, 200), rng.uniform(-2, 2, 200)
    assert np.allclose(sim.triple_well_potential(x1, x2), sim.triple_well_potential(-x1, x2), rtol=1e-14)
    h = 1e-6
    g1, g2 = sim.triple_well_gradient(x1, x2)
    fd1 = (sim.triple_well_potential(x1 + h, x2) - sim.triple_well_potential(x1 - h, x2)) / (2 * h)
    fd2 = (sim.triple_well_potential(x1, x2 + h) - sim.triple_well_potential(x1, x2 - h)) / (2 * h)
    assert np.max(np.abs(g1 - fd1)) < 1e-6 * max(1, np.abs(fd1).max())
    assert np.max(np.abs(g2 - fd2)) < 1e-6 * max(1, np.abs(fd2).max())
    drift = sim.triple_well_2d().drift(np.stack([x1, x2]))
    assert np.allclose(drift, -np.stack([g1, g2]))
    assert np.isclose(sim.triple_well_2d(1.68).diffusion, np.sqrt(2 / 1.68))


def test_ou_truth_examples():
    assert sim.ou_truth(1, 4, 0.5, 1)[0] == 1.0
    assert np.isclose(sim.ou_truth(1, 4, 0.5, 2)[0], 0.60653, atol=1e-5)
    assert np.isclose(sim.ou_truth(1, 4, 0.5, 3)[0], 0.36788, atol=1e-5)
    x = np.linspace(-1, 1, 5)
    assert np.allclose(sim.ou_truth(1, 4, 0.5, 2)[1](x), 2 * x)
    assert np.allclose(sim.ou_truth(1, 4, 0.5, 3)[1](x), ((2 * x) ** 2 - 1) / np.sqrt(2))
    with pytest.raises(ContractError):
        sim.ou_truth(1, 4, 0.5, 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.floats(-3, 3))
def test_hermite_matches_numpy(n, x):
    coef = np.zeros(n + 1)
    coef[n] = 1
    assert np.isclose(sim.hermite_prob(n, x), np.polynomial.hermite_e.hermeval(x, coef), rtol=1e-12, atol=1e-12)


def test_heat_boundaries_initial_and_linear_steady_state():
    spec = sim.HeatPdeSpec(kappa0=1.0, chi=0.0, n_x=21, t_end=10.0)
    field = sim.heat_solve(spec)
    x = field.x
    assert np.all(field.U[:, 0] == 2.0) and np.all(field.U[:, -1] == 1.0)
    assert np.allclose(field.U[0, 1:-1], sim.heat_initial_profile(x)[1:-1])
    assert np.allclose(field.U[-1], 2 - (x - 1) / 2, atol=1e-6)


def test_heat_linear_series_refinement():
    def err(n_x):
        spec = sim.HeatPdeSpec(kappa0=1.0, chi=0.0, n_x=n_x, t_end=0.2,
                               initial=lambda x: 2 - (x - 1) / 2 + np.sin(np.pi * (x - 1) / 2))
        dt = sim.heat_stable_dt(spec)
        spec.dt = 0.2 / np.ceil(0.2 / dt)
        field = sim.heat_solve(spec)
        x = field.x
        exact = 2 - (x - 1) / 2 + np.exp(-(np.pi / 2) ** 2 * 0.2) * np.sin(np.pi * (x - 1) / 2)
        return np.max(np.abs(field.U[-1] - exact))

    assert err(21) / err(41) >= 3.5


def test_heat_stability_and_grid_checks():
    with pytest.raises(ConfigurationError):
        sim.heat_solve(sim.HeatPdeSpec(dt=1.0))
    with pytest.raises(ConfigurationError):
        sim.heat_solve(sim.HeatPdeSpec(n_x=3))


def test_presets_are_deterministic():
    a, b = generate("ou", {"m": 100}, seed=5), generate("ou", {"m": 100}, seed=5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)
    c = generate("ou", {"m": 100}, seed=6)
    assert not np.array_equal(a.X, c.X)
    assert a.meta["system"] == "ou" and a.tau == 0.5
    tw = generate("triple-well", {"m": 50, "tau": 0.01})
    assert tw.X.shape == (2, 50) and np.all(np.abs(tw.X) <= 2)
    with pytest.raises(ConfigurationError):
        generate("ou", {"bogus": 1})
