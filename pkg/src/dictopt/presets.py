"""Named settings for the four benchmark systems.

Each system has default simulation parameters, a default dictionary (or
PDE term list with initial parameters) and default fit options.  They are
shared by the command-line driver and the benchmark runner, so a preset
fit from the CLI reproduces the benchmark numbers.
"""

import copy

import numpy as np

from . import simulate as sim
from .data import TrajectoryData
from .dictionary import CosineFreq, Dictionary, Monomial, SineFreq, gaussian_dictionary
from .errors import ConfigurationError
from .sysid.pde import HEAT_TERMS

__all__ = [
    "SYSTEMS",
    "SYSTEM_DEFAULTS",
    "FIT_DEFAULTS",
    "DEFAULT_SEEDS",
    "system_params",
    "generate",
    "ou_skewed_dictionary",
    "ou_fixed_dictionary",
    "triple_well_dictionary",
    "chua_dictionary",
    "default_dictionary",
    "HEAT_CHI0",
    "CHUA_REGION1_W1",
    "CHUA_REGION2_W1",
]

SYSTEMS = ("ou", "triple-well", "chua", "heat")

SYSTEM_DEFAULTS = {
    "ou": dict(alpha=1.0, beta=4.0, tau=0.5, m=5000, eta=1e-3),
    # 20 000 pairs rather than 100 000 keep the triple-well benchmark inside its runtime budget
    "triple-well": dict(beta=1.68, tau=1.0, m=20000, eta=1e-3, box=2.0),
    "chua": dict(a=2.6, b=0.11, d=0.0, alpha=10.2, beta=14.286, eta=0.005, t_end=100.0,
                 x0=[0.1, 0.0, 0.0]),
    "heat": dict(kappa0=0.1, chi=-1.0, n_x=101, t_end=2.0, dt=None),
}

DEFAULT_SEEDS = {"ou": 2, "triple-well": 0, "chua": 0, "heat": 0}

# the keys map onto OptimizerConfig fields plus the fit-specific options
FIT_DEFAULTS = {
    "ou": dict(kind="edmd", optimizer=dict(max_iters=500), ridge_scale=0.1, refit=True),
    "triple-well": dict(kind="edmd", optimizer=dict(max_iters=300), ridge_scale=0.01, refit=True),
    "chua": dict(kind="sindy", optimizer=dict(max_iters=3000), threshold=0.05),
    "heat": dict(kind="pdefind", optimizer=dict(max_iters=2000, step_size=3e-4, step_size_w=1e-2),
                 threshold=0.05),
}

CHUA_REGION1_W1 = 1.0
CHUA_REGION2_W1 = 2.4
HEAT_CHI0 = -0.5


def system_params(system, overrides=None):
    """Defaults for ``system`` updated with ``overrides``; unknown keys are rejected."""
    if system not in SYSTEM_DEFAULTS:
        raise ConfigurationError(f"unknown system {system!r}; expected one of {', '.join(SYSTEMS)}")
    params = copy.deepcopy(SYSTEM_DEFAULTS[system])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ConfigurationError(f"unknown parameter {key!r} for system {system!r}")
        params[key] = value
    return params


def _positive_int(params, key):
    value = params[key]
    if int(value) != value or value < 1:
        raise ConfigurationError(f"{key} must be a positive integer, got {value!r}")
    return int(value)


def generate(system, params=None, seed=None):
    """Simulate the benchmark data for ``system``.

    Stochastic systems draw their initial states from ``default_rng(seed)``
    and the Brownian increments from ``default_rng(seed + 100)``.
    """
    p = system_params(system, params)
    seed = DEFAULT_SEEDS[system] if seed is None else int(seed)
    meta = dict(system=system, params=p, seed=seed)
    if system == "ou":
        m = _positive_int(p, "m")
        spec = sim.ou_process(p["alpha"], p["beta"])
        # stationary spread of dX = -alpha X dt + sqrt(2/beta) dW
        X0 = np.random.default_rng(seed).normal(0.0, np.sqrt(1.0 / (p["alpha"] * p["beta"])), (1, m))
        return sim.burst_pairs(spec, X0, p["tau"], p["eta"], seed=seed + 100, meta=meta)
    if system == "triple-well":
        m = _positive_int(p, "m")
        box = float(p["box"])
        X0 = np.random.default_rng(seed).uniform(-box, box, (2, m))
        return sim.burst_pairs(sim.triple_well_2d(p["beta"]), X0, p["tau"], p["eta"],
                               seed=seed + 100, meta=meta)
    if system == "chua":
        if not p["eta"] > 0 or not p["t_end"] > 0:
            raise ConfigurationError("chua needs positive eta and t_end")
        steps = int(round(p["t_end"] / p["eta"]))
        spec = sim.chua_system(p["a"], p["b"], p["d"], p["alpha"], p["beta"])
        traj, derivs = sim.rk4_integrate(spec, np.asarray(p["x0"], dtype=np.float64), p["eta"], steps)
        meta["eta"] = p["eta"]
        return TrajectoryData(traj.T, Xdot=derivs.T, meta=meta)
    spec = sim.HeatPdeSpec(kappa0=p["kappa0"], chi=p["chi"], n_x=_positive_int(p, "n_x"),
                           t_end=p["t_end"], dt=p["dt"])
    field = sim.heat_solve(spec)
    field.meta.update(meta)
    return field


def ou_skewed_dictionary(sigma=0.15):
    """14 Gaussians with centres crowded into the left half of the OU range."""
    return gaussian_dictionary(np.linspace(-1.8, 0.6, 14), sigma)


def ou_fixed_dictionary():
    """Six evenly spaced Gaussians; a well-conditioned fixed basis for the OU data."""
    return gaussian_dictionary(np.linspace(-1.5, 1.5, 6), 0.2)


def triple_well_dictionary(sigma=0.5):
    """25 Gaussians on a 5 x 5 grid over ``[0, 2] x [-2, 2]`` (right half only)."""
    c1, c2 = np.meshgrid(np.linspace(0.0, 2.0, 5), np.linspace(-2.0, 2.0, 5), indexing="ij")
    return gaussian_dictionary(np.stack([c1.ravel(), c2.ravel()], axis=1), sigma)


def chua_dictionary(w1=CHUA_REGION1_W1, w2=1.0):
    """``{x1, x2, x3, x1 x3, x1 x2, x2^2, sin(w1 x1), cos(w2 x2)}`` with only w1, w2 trainable."""
    basis = [Monomial(e) for e in ([1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 0], [0, 2, 0])]
    basis.append(SineFreq([w1], 0.0, trainable=[True, False]))
    basis.append(CosineFreq([0.0, w2], 0.0, trainable=[False, True, False]))
    return Dictionary(basis, ["x1", "x2", "x3"])


def default_dictionary(system):
    """The preset dictionary, or ``(terms, w0)`` for the heat library."""
    if system == "ou":
        return ou_skewed_dictionary()
    if system == "triple-well":
        return triple_well_dictionary()
    if system == "chua":
        return chua_dictionary()
    if system == "heat":
        return list(HEAT_TERMS), {"chi": HEAT_CHI0}
    raise ConfigurationError(f"unknown system {system!r}")
