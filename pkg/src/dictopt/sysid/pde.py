"""Parametric PDE-FIND on a one-dimensional space-time grid.

Finite differences are second-order central stencils evaluated on interior
grid points only: the first and last time slice and the first and last
spatial column never enter a regression row.  Rows are flattened
time-major, i.e. row ``k * (n_x - 2) + j`` is interior point ``(k + 1, j + 1)``.

Library terms are strings built from the factors ``1``, ``u``, ``u_x`` and
``u_xx`` (optionally raised to an integer power, e.g. ``u^2`` or ``u_x^2``)
and parametric factors ``exp(name*u)``, joined by ``*``.  Every distinct
``name`` becomes one entry of the parameter vector ``w``.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..data import GridField
from ..errors import ContractError
from ..optimizers import GradientOracle, OptimizerConfig, alternating_adam
from .sparsify import stlsq

__all__ = [
    "HEAT_TERMS",
    "PdeLibrary",
    "PdeModel",
    "TermSpec",
    "PdeOracle",
    "parse_term",
    "finite_diff_time",
    "finite_diff_space",
    "build_pde_library",
    "pdefind_solve",
    "pde_loss",
    "pde_error",
    "grad_xi",
    "pde_grad_w",
    "per_sample_pde_loss",
    "fit_pdefind",
    "fit_parametric_pdefind",
    "threshold_pde",
]

HEAT_TERMS = (
    "1",
    "u",
    "u_x",
    "u*u_x",
    "u^2*u_x",
    "u*u_xx",
    "u^2*u_xx",
    "exp(chi*u)*u_x^2",
    "exp(chi*u)*u_xx",
)

_BASES = ("u", "u_x", "u_xx")
_FACTOR = re.compile(r"^(u_xx|u_x|u)(?:\^(\d+))?$")
_EXP = re.compile(r"^exp\(([A-Za-z_][A-Za-z0-9_]*)\*u\)$")


@dataclass(frozen=True)
class TermSpec:
    """Parsed library term: integer powers of the bases and the exponential parameter names."""

    label: str
    powers: tuple
    exp_params: tuple


def parse_term(label):
    """Parse a term label into a :class:`TermSpec`; unknown syntax raises ContractError."""
    if not isinstance(label, str) or not label.strip():
        raise ContractError(f"invalid term label {label!r}")
    powers = dict.fromkeys(_BASES, 0)
    exps = []
    for factor in _split_factors(label.replace(" ", "")):
        if factor == "1":
            continue
        m = _FACTOR.match(factor)
        if m:
            powers[m.group(1)] += int(m.group(2) or 1)
            continue
        m = _EXP.match(factor)
        if m:
            exps.append(m.group(1))
            continue
        raise ContractError(f"unknown factor {factor!r} in term {label!r}")
    return TermSpec(label, tuple(powers[b] for b in _BASES), tuple(exps))


def _split_factors(label):
    # '*' also appears inside exp(name*u), so split only at depth zero
    out, depth, start = [], 0, 0
    for k, ch in enumerate(label):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "*" and depth == 0:
            out.append(label[start:k])
            start = k + 1
    out.append(label[start:])
    if depth != 0 or any(not f for f in out):
        raise ContractError(f"malformed term {label!r}")
    return out


def _interior(field):
    if not isinstance(field, GridField):
        raise ContractError("expected a GridField")
    if field.n_t < 3 or field.n_x < 3:
        raise ContractError("grid too small for central differences")
    return field.U


def finite_diff_time(field):
    """Central difference ``(U[k+1] - U[k-1]) / (2 dt)`` on interior points, ``(n_t-2, n_x-2)``."""
    U = _interior(field)
    return (U[2:, 1:-1] - U[:-2, 1:-1]) / (2.0 * field.dt)


def finite_diff_space(field, order=1):
    """Central first or second spatial derivative on interior points, ``(n_t-2, n_x-2)``."""
    U = _interior(field)
    if order == 1:
        return (U[1:-1, 2:] - U[1:-1, :-2]) / (2.0 * field.dx)
    if order == 2:
        return (U[1:-1, 2:] - 2.0 * U[1:-1, 1:-1] + U[1:-1, :-2]) / field.dx**2
    raise ContractError(f"order must be 1 or 2, got {order}")


@dataclass
class PdeLibrary:
    """Evaluated library ``Theta`` ``(N, p)`` with its parameter derivatives.

    ``dtheta[k]`` is ``d Theta / d w_k`` for ``w_k`` named ``param_names[k]``;
    ``shape`` is the interior grid shape the rows were flattened from.
    """

    theta: np.ndarray
    labels: list
    param_names: list
    dtheta: np.ndarray
    shape: tuple

    @property
    def n_terms(self):
        return self.theta.shape[1]


class _LibraryBuilder:
    """Parses the terms once and re-evaluates the library for new parameters."""

    def __init__(self, field, terms):
        self.specs = [parse_term(t) for t in terms]
        if not self.specs:
            raise ContractError("empty term list")
        names = []
        for s in self.specs:
            for n in s.exp_params:
                if n not in names:
                    names.append(n)
        self.param_names = names
        u = field.U[1:-1, 1:-1]
        self.shape = u.shape
        bases = {"u": u, "u_x": finite_diff_space(field, 1), "u_xx": finite_diff_space(field, 2)}
        self.u = u.ravel()
        self.static = np.empty((self.u.size, len(self.specs)))
        for j, s in enumerate(self.specs):
            col = np.ones(self.u.size)
            for b, p in zip(_BASES, s.powers):
                if p:
                    col = col * bases[b].ravel() ** p
            self.static[:, j] = col

    def coerce(self, w):
        if w is None:
            if self.param_names:
                raise ContractError(f"parameters {self.param_names} need values")
            return np.zeros(0)
        if isinstance(w, dict):
            missing = [n for n in self.param_names if n not in w]
            if missing:
                raise ContractError(f"missing parameter values for {missing}")
            w = [w[n] for n in self.param_names]
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        if w.shape != (len(self.param_names),):
            raise ContractError(f"expected {len(self.param_names)} parameters, got shape {w.shape}")
        return w

    def build(self, w):
        w = self.coerce(w)
        theta = self.static.copy()
        dtheta = np.zeros((len(self.param_names),) + theta.shape)
        values = dict(zip(self.param_names, w))
        with np.errstate(over="ignore"):
            for j, s in enumerate(self.specs):
                for n in s.exp_params:
                    theta[:, j] *= np.exp(values[n] * self.u)
            for j, s in enumerate(self.specs):
                for n in s.exp_params:
                    k = self.param_names.index(n)
                    dtheta[k, :, j] += self.u * theta[:, j]
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(dtheta))):
            raise ContractError("library overflowed for the given parameters")
        return PdeLibrary(theta, [s.label for s in self.specs], list(self.param_names), dtheta, self.shape)


def build_pde_library(field, terms=HEAT_TERMS, w=None):
    """Evaluate the candidate terms on the interior grid points.

    ``w`` is a sequence aligned with the parameter names in order of first
    appearance, or a mapping from name to value.
    """
    return _LibraryBuilder(field, terms).build(w)


def _rows(theta, ut):
    T = linalg.as_matrix(theta, "theta")
    b = np.asarray(ut, dtype=np.float64).ravel()
    if b.size != T.shape[0]:
        raise ContractError(f"theta has {T.shape[0]} rows, U_t has {b.size} entries")
    return T, b


def pdefind_solve(theta, ut, rcond=linalg.DEFAULT_RCOND):
    """Least-squares ``xi`` minimizing ``||U_t - Theta xi||^2``."""
    T, b = _rows(theta, ut)
    return linalg.lstsq(T, b, rcond)


def pde_loss(xi, theta, ut):
    """``||U_t - Theta xi||_2^2``."""
    T, b = _rows(theta, ut)
    r = b - T @ np.asarray(xi, dtype=np.float64)
    return float(r @ r)


def pde_error(xi, theta, ut):
    return float(np.sqrt(pde_loss(xi, theta, ut)))


def grad_xi(xi, theta, ut):
    """``2 Theta^T Theta xi - 2 Theta^T U_t``."""
    T, b = _rows(theta, ut)
    return 2.0 * (T.T @ (T @ xi) - T.T @ b)


def pde_grad_w(xi, library, ut):
    """Gradient of the PDE loss with respect to the library parameters."""
    T, b = _rows(library.theta, ut)
    r = b - T @ xi
    return np.array([-2.0 * r @ (D @ xi) for D in library.dtheta])


def per_sample_pde_loss(xi, theta, ut, i):
    """Squared residual of regression row ``i``."""
    T, b = _rows(theta, ut)
    if not 0 <= i < b.size:
        raise ContractError(f"row index {i} out of range [0, {b.size})")
    r = b[i] - T[i] @ xi
    return float(r * r)


class PdeOracle(GradientOracle):
    """Row-batch gradients of the PDE loss with respect to ``xi`` at a fixed library."""

    def __init__(self, theta, ut, scale=1.0):
        self.theta, self.ut = _rows(theta, ut)
        self.n_samples = self.ut.size
        self.scale = scale

    def batch_gradient(self, xi, idx):
        T, b = (self.theta, self.ut) if idx is None else (self.theta[idx], self.ut[idx])
        return self.scale * 2.0 * (T.T @ (T @ xi) - T.T @ b)


@dataclass
class PdeModel:
    """Discovered PDE ``u_t = sum_j xi_j * term_j`` with parameter values ``w``."""

    terms: list
    xi: np.ndarray
    w: np.ndarray
    param_names: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.terms = list(self.terms)
        self.xi = np.asarray(self.xi, dtype=np.float64).ravel()
        self.w = np.atleast_1d(np.asarray(self.w, dtype=np.float64))
        self.param_names = list(self.param_names)
        if self.xi.size != len(self.terms):
            raise ContractError(f"{self.xi.size} coefficients for {len(self.terms)} terms")
        if self.w.size != len(self.param_names):
            raise ContractError(f"{self.w.size} parameter values for {len(self.param_names)} names")
        if not (np.all(np.isfinite(self.xi)) and np.all(np.isfinite(self.w))):
            raise ContractError("PDE model has non-finite entries")

    @property
    def labels(self):
        return list(self.terms)

    @property
    def params(self):
        return dict(zip(self.param_names, self.w.tolist()))

    def surviving_terms(self):
        return [t for t, c in zip(self.terms, self.xi) if c != 0.0]

    def equations(self, precision=16):
        from .equations import format_pde

        return format_pde(self, precision)


def fit_pdefind(field, terms=HEAT_TERMS, w=None, rcond=linalg.DEFAULT_RCOND):
    """Standard PDE-FIND regression at fixed parameters."""
    builder = _LibraryBuilder(field, terms)
    lib = builder.build(w)
    xi = pdefind_solve(lib.theta, finite_diff_time(field), rcond)
    return PdeModel(lib.labels, xi, builder.coerce(w), lib.param_names, {"fit": "pdefind"})


def threshold_pde(model, field, threshold=0.05, rcond=linalg.DEFAULT_RCOND):
    """Hard-threshold the coefficients relative to the largest and refit on the survivors."""
    lib = build_pde_library(field, model.terms, model.w)
    xi = stlsq(lib.theta, finite_diff_time(field), model.xi, threshold, rcond)
    prov = dict(model.provenance, threshold=threshold)
    return PdeModel(model.terms, xi, model.w.copy(), model.param_names, prov)


def fit_parametric_pdefind(field, terms=HEAT_TERMS, w0=None, xi0=None, config=None, threshold=None,
                           rcond=linalg.DEFAULT_RCOND, stop_on_plateau=True, callback=None):
    """Learn ``xi`` and the term parameters jointly with alternating Adam.

    Both blocks descend ``||U_t - Theta(w) xi||^2``.  ``xi0=None`` starts from
    the least-squares solution at ``w0``.  With ``threshold`` set, the result
    is passed through :func:`threshold_pde`.  History records carry the
    unsquared residual in both loss slots; ``callback(it, xi, w)`` is passed on
    to :func:`~dictopt.optimizers.alternating_adam`.
    """
    cfg = config or OptimizerConfig()
    builder = _LibraryBuilder(field, terms)
    ut = finite_diff_time(field).ravel()
    w0 = builder.coerce(w0)
    cache = {}

    def library(w):
        key = w.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = builder.build(w)
        return cache[key]

    xi0 = pdefind_solve(library(w0).theta, ut, rcond) if xi0 is None else np.asarray(xi0, dtype=np.float64)

    def grad_A(xi, w):
        return grad_xi(xi, library(w).theta, ut)

    def grad_w(xi, w):
        return pde_grad_w(xi, library(w), ut)

    def loss(xi, w):
        return pde_error(xi, library(w).theta, ut)

    xi, w, history = alternating_adam(xi0, w0, grad_A, grad_w, cfg, loss, loss,
                                      stop_on_plateau=stop_on_plateau, callback=callback)
    prov = {
        "fit": "pdefind",
        "optimizer": cfg.to_dict(),
        "iterations": history[-1].iteration,
        "final_loss": pde_loss(xi, library(w).theta, ut),
        "final_error": history[-1].loss_1,
        "data": dict(field.meta),
    }
    model = PdeModel(list(terms), xi, w, builder.param_names, prov)
    if threshold is not None:
        model = threshold_pde(model, field, threshold, rcond)
    return model, history
