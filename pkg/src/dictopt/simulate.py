"""Data generators for the benchmark systems.

Random numbers come from numpy's ``PCG64`` bit generator
(``np.random.default_rng(seed)``), whose output stream is specified and
platform independent.  Normal increments are drawn one step at a time in
state-major order, so a run is fully determined by ``(seed, x0, eta, steps)``.
"""

from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np

from .data import GridField, TrajectoryData
from .errors import BlowUpError, ConfigurationError, ContractError

__all__ = [
    "SdeSpec",
    "OdeSpec",
    "HeatPdeSpec",
    "euler_maruyama",
    "subsample_pairs",
    "burst_pairs",
    "rk4_integrate",
    "chua_system",
    "triple_well_potential",
    "triple_well_gradient",
    "triple_well_2d",
    "ou_process",
    "ou_truth",
    "hermite_prob",
    "heat_initial_profile",
    "heat_stable_dt",
    "heat_solve",
]


@dataclass
class SdeSpec:
    """``dX = drift(X) dt + diffusion(X) dW``.

    ``drift`` maps a ``(d, k)`` batch of states to ``(d, k)``.  ``diffusion``
    is either a scalar (multiple of the identity) or a callable returning
    ``(d, d, k)`` matrices.
    """

    drift: Callable
    diffusion: object
    dim: int
    name: str = "sde"
    params: dict = field(default_factory=dict)

    def noise(self, X, dW):
        if callable(self.diffusion):
            S = self.diffusion(X)
            return np.einsum("ijk,jk->ik", S, dW)
        return self.diffusion * dW


@dataclass
class OdeSpec:
    """``dx/dt = rhs(x)`` with ``rhs`` acting on ``(d, k)`` batches."""

    rhs: Callable
    dim: int
    name: str = "ode"
    params: dict = field(default_factory=dict)


def _batch(x0, dim):
    x = np.array(x0, dtype=np.float64, copy=True)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    if x.shape[0] != dim:
        raise ContractError(f"initial state has dimension {x.shape[0]}, system has {dim}")
    return x, single


def euler_maruyama(spec, x0, eta, steps, seed=None, rng=None, record_stride=1):
    """Integrate an SDE with ``X_{k+1} = X_k + eta*b(X_k) + sigma(X_k) dW_k``, ``dW_k ~ N(0, eta I)``.

    ``x0`` may be a single state ``(d,)`` or a batch ``(d, k)`` of independent
    chains.  States are recorded every ``record_stride`` steps (the initial
    state always, the final state whenever ``steps`` is a multiple of the
    stride).  Returns ``(n_records, d)`` or ``(n_records, d, k)``.

    Raises
    ------
    BlowUpError
        When the state becomes non-finite; ``step`` names the offending step.
    """
    if not eta > 0:
        raise ContractError(f"step size must be positive, got {eta}")
    if steps < 0 or record_stride < 1:
        raise ContractError("steps must be >= 0 and record_stride >= 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    x, single = _batch(x0, spec.dim)
    sq = np.sqrt(eta)
    out = [x.copy()]
    for k in range(1, steps + 1):
        dW = sq * rng.standard_normal(x.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            x = x + eta * spec.drift(x) + spec.noise(x, dW)
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"non-finite state at step {k}", k)
        if k % record_stride == 0:
            out.append(x.copy())
    traj = np.stack(out)
    return traj[:, :, 0] if single else traj


def _lag_steps(tau, eta):
    if not (tau > 0 and eta > 0):
        raise ContractError("tau and eta must be positive")
    ratio = tau / eta
    lag = int(round(ratio))
    if lag < 1 or abs(ratio - lag) > 1e-9 * max(1.0, ratio):
        raise ContractError(f"lag time {tau} is not an integer multiple of the step {eta}")
    return lag


def subsample_pairs(trajectory, tau, eta, stride=None, meta=None):
    """Build lagged pairs ``(x_k, x_{k+tau/eta})`` from recorded trajectories.

    ``trajectory`` is ``(T+1, d)`` or ``(T+1, d, k)`` with records spaced by
    ``eta``.  Starts are spaced by ``stride`` records (default ``tau/eta``,
    i.e. disjoint windows, giving ``floor(T*eta/tau)`` pairs per chain).
    Pairs from several chains are concatenated chain by chain.
    """
    lag = _lag_steps(tau, eta)
    stride = lag if stride is None else int(stride)
    if stride < 1:
        raise ContractError("stride must be positive")
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim == 2:
        traj = traj[:, :, None]
    T = traj.shape[0] - 1
    starts = np.arange(0, T - lag + 1, stride)
    Xs, Ys = [], []
    for c in range(traj.shape[2]):
        Xs.append(traj[starts, :, c].T)
        Ys.append(traj[starts + lag, :, c].T)
    info = dict(meta or {})
    info.update(tau=tau, eta=eta, stride=stride)
    return TrajectoryData(np.hstack(Xs), Y=np.hstack(Ys), tau=tau, meta=info)


def burst_pairs(spec, X0, tau, eta, seed=None, meta=None):
    """Pairs ``(x_i, y_i)`` where each ``y_i`` integrates ``x_i`` for one lag ``tau``."""
    lag = _lag_steps(tau, eta)
    X0 = np.atleast_2d(np.asarray(X0, dtype=np.float64))
    traj = euler_maruyama(spec, X0, eta, lag, seed=seed, record_stride=lag)
    info = dict(meta or {})
    info.update(tau=tau, eta=eta, noise_seed=seed)
    return TrajectoryData(traj[0], Y=traj[-1], tau=tau, meta=info)


def rk4_integrate(spec, x0, eta, steps):
    """Classical fourth-order Runge-Kutta with a fixed step.

    Returns ``(trajectory, derivatives)``, both ``(steps+1, d)``, where the
    derivatives are ``rhs`` evaluated exactly along the trajectory.
    """
    if not eta > 0:
        raise ContractError(f"step size must be positive, got {eta}")
    x, single = _batch(x0, spec.dim)
    f = spec.rhs
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f(x)
            k2 = f(x + 0.5 * eta * k1)
            k3 = f(x + 0.5 * eta * k2)
            k4 = f(x + eta * k3)
            x = x + (eta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"non-finite state at step {k}", k)
        out[k] = x
    flat = out.transpose(1, 0, 2).reshape(spec.dim, -1)
    derivs = f(flat).reshape(spec.dim, steps + 1, -1).transpose(1, 0, 2)
    if single:
        return out[:, :, 0], derivs[:, :, 0]
    return out, derivs


def chua_system(a=2.6, b=0.11, d=0.0, alpha=10.2, beta=14.286):
    """Modified Chua circuit with sinusoidal resistor ``f(x) = -b sin(pi x1 / a + d)``."""
    if a == 0:
        raise ContractError("a must be nonzero")

    def rhs(X):
        f = -b * np.sin(np.pi * X[0] / a + d)
        return np.stack([alpha * (X[1] - f), X[0] - X[1] + X[2], -beta * X[1]])

    return OdeSpec(rhs, 3, "chua", dict(a=a, b=b, d=d, alpha=alpha, beta=beta))


def _tw_terms(x1, x2):
    e1 = np.exp(-x1**2 - (x2 - 1.0 / 3.0) ** 2)
    e2 = np.exp(-x1**2 - (x2 - 5.0 / 3.0) ** 2)
    e3 = np.exp(-(x1 - 1.0) ** 2 - x2**2)
    e4 = np.exp(-(x1 + 1.0) ** 2 - x2**2)
    return e1, e2, e3, e4


def triple_well_potential(x1, x2):
    e1, e2, e3, e4 = _tw_terms(x1, x2)
    return (3.0 * e1 - 3.0 * e2 - 5.0 * e3 - 5.0 * e4
            + 0.2 * x1**4 + 0.2 * (x2 - 1.0 / 3.0) ** 4)


def triple_well_gradient(x1, x2):
    """Analytic ``(dV/dx1, dV/dx2)``."""
    e1, e2, e3, e4 = _tw_terms(x1, x2)
    g1 = (-6.0 * x1 * e1 + 6.0 * x1 * e2 + 10.0 * (x1 - 1.0) * e3
          + 10.0 * (x1 + 1.0) * e4 + 0.8 * x1**3)
    g2 = (-6.0 * (x2 - 1.0 / 3.0) * e1 + 6.0 * (x2 - 5.0 / 3.0) * e2
          + 10.0 * x2 * e3 + 10.0 * x2 * e4 + 0.8 * (x2 - 1.0 / 3.0) ** 3)
    return g1, g2


def triple_well_2d(beta=1.68):
    """Overdamped Langevin dynamics in the triple-well potential."""

    def drift(X):
        g1, g2 = triple_well_gradient(X[0], X[1])
        return -np.stack([g1, g2])

    return SdeSpec(drift, np.sqrt(2.0 / beta), 2, "triple-well", dict(beta=beta))


def ou_process(alpha=1.0, beta=4.0):
    """Ornstein-Uhlenbeck process ``dX = -alpha X dt + sqrt(2/beta) dW``."""
    if not (alpha > 0 and beta > 0):
        raise ContractError("alpha and beta must be positive")
    return SdeSpec(lambda X: -alpha * X, np.sqrt(2.0 / beta), 1, "ou",
                   dict(alpha=alpha, beta=beta))


def hermite_prob(n, x):
    """Probabilists' Hermite polynomial ``He_n`` via ``He_{k+1} = x He_k - k He_{k-1}``."""
    x = np.asarray(x, dtype=np.float64)
    h_prev, h = np.ones_like(x), x.copy()
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, x * h - k * h_prev
    return h


def ou_truth(alpha, beta, tau, i):
    """Exact ``i``-th (1-based) Koopman eigenvalue and eigenfunction of the OU process."""
    if i < 1:
        raise ContractError("eigenpair index is 1-based")
    lam = float(np.exp(-alpha * (i - 1) * tau))
    scale = np.sqrt(alpha * beta)
    norm = 1.0 / np.sqrt(factorial(i - 1))

    def phi(x):
        return norm * hermite_prob(i - 1, scale * np.asarray(x, dtype=np.float64))

    return lam, phi


@dataclass
class HeatPdeSpec:
    """Nonlinear heat equation ``rho c_p u_t = (kappa(u) u_x)_x`` with ``kappa = kappa0 exp(chi u)``.

    ``dt=None`` picks the largest step allowed by :func:`heat_stable_dt`.
    Snapshots are stored every ``store_every`` solver steps.
    """

    kappa0: float = 0.1
    chi: float = -1.0
    rho: float = 1.0
    c_p: float = 1.0
    x_lo: float = 1.0
    x_hi: float = 3.0
    u_lo: float = 2.0
    u_hi: float = 1.0
    n_x: int = 101
    t_end: float = 2.0
    dt: float = None
    store_every: int = 1
    initial: Callable = None

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / (self.n_x - 1)


def heat_initial_profile(x):
    """``u(x, 0) = 2 - (x - 1)/2 + (x - 1)(x - 3)``."""
    x = np.asarray(x, dtype=np.float64)
    return 2.0 - (x - 1.0) / 2.0 + (x - 1.0) * (x - 3.0)


def heat_stable_dt(spec, u_range=(0.0, 2.5)):
    """``0.4 rho c_p dx^2 / (kappa0 max exp(chi u))`` over ``u_range``."""
    kmax = spec.kappa0 * max(np.exp(spec.chi * u_range[0]), np.exp(spec.chi * u_range[1]))
    return 0.4 * spec.rho * spec.c_p * spec.dx**2 / kmax


def heat_solve(spec):
    """Explicit finite-difference solve with Dirichlet boundaries.

    Interior update::

        u_j += dt/(rho c_p) * [kappa0 chi e^{chi u_j} ((u_{j+1}-u_{j-1})/(2dx))^2
                               + kappa0 e^{chi u_j} (u_{j+1} - 2u_j + u_{j-1})/dx^2]

    Raises ConfigurationError before running if ``dt`` violates the stability
    bound and BlowUpError if the solution becomes non-finite.
    """
    if spec.n_x < 5 or spec.store_every < 1 or not spec.t_end > 0:
        raise ConfigurationError("heat grid needs n_x >= 5, store_every >= 1 and t_end > 0")
    bound = heat_stable_dt(spec)
    dt = bound if spec.dt is None else spec.dt
    if not 0 < dt <= bound * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt} violates the explicit stability bound {bound:.6g}")
    dx = spec.dx
    steps = int(np.ceil(spec.t_end / dt - 1e-9))
    x = spec.x_lo + dx * np.arange(spec.n_x)
    u = (spec.initial or heat_initial_profile)(x).astype(np.float64)
    u[0], u[-1] = spec.u_lo, spec.u_hi
    c = dt / (spec.rho * spec.c_p)
    k0, chi = spec.kappa0, spec.chi
    snaps = [u.copy()]
    for k in range(1, steps + 1):
        ux = (u[2:] - u[:-2]) / (2.0 * dx)
        uxx = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
        e = np.exp(chi * u[1:-1])
        u[1:-1] = u[1:-1] + c * (k0 * chi * e * ux * ux + k0 * e * uxx)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite temperature at step {k}", k)
        if k % spec.store_every == 0:
            snaps.append(u.copy())
    meta = dict(system="heat", kappa0=k0, chi=chi, rho=spec.rho, c_p=spec.c_p,
                solver_dt=dt, steps=steps)
    return GridField(np.array(snaps), dx, dt * spec.store_every, spec.x_lo, 0.0, meta)
