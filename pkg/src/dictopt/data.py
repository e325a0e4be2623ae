"""Containers for paired snapshot data and space-time grids."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

__all__ = ["TrajectoryData", "GridField"]


@dataclass
class TrajectoryData:
    """Paired samples stored column-wise.

    Either ``Y`` (states after lag ``tau``) or ``Xdot`` (time derivatives)
    accompanies ``X``.  ``meta`` carries provenance such as the system name,
    parameters, seed and integration step.
    """

    X: np.ndarray
    Y: np.ndarray = None
    Xdot: np.ndarray = None
    tau: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        if (self.Y is None) == (self.Xdot is None):
            raise ContractError("exactly one of Y or Xdot must be given")
        other = self.Y if self.Y is not None else self.Xdot
        other = np.atleast_2d(np.asarray(other, dtype=np.float64))
        if other.shape != self.X.shape:
            raise ContractError(f"paired block has shape {other.shape}, X has {self.X.shape}")
        if self.Y is not None:
            self.Y = other
            if self.tau is not None and not self.tau > 0:
                raise ContractError("lag time must be positive")
        else:
            self.Xdot = other

    @property
    def kind(self):
        return "lagged" if self.Y is not None else "derivative"

    @property
    def dim(self):
        return self.X.shape[0]

    @property
    def n_samples(self):
        return self.X.shape[1]

    def __len__(self):
        return self.n_samples


@dataclass
class GridField:
    """Solution values ``U[k, j] = u(x0 + j*dx, t0 + k*dt)`` (time-major)."""

    U: np.ndarray
    dx: float
    dt: float
    x0: float = 0.0
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        if self.U.ndim != 2:
            raise ContractError(f"U must be 2-d (n_t, n_x), got {self.U.shape}")
        if min(self.U.shape) < 5:
            raise ContractError(f"grid needs at least 5 points per axis, got {self.U.shape}")
        if not (self.dx > 0 and self.dt > 0):
            raise ContractError("grid spacings must be positive")

    @property
    def n_t(self):
        return self.U.shape[0]

    @property
    def n_x(self):
        return self.U.shape[1]

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.n_x)

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.n_t)
