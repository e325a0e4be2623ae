"""Parametric SINDy: ``xdot ~ Xi^T psi(x, w)``.

``Xi`` is ``(n, d)``: column ``k`` holds the coefficients of the equation for
state ``k``.  As in :mod:`dictopt.koopman` the loss is the squared Frobenius
residual and histories report its square root.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..data import TrajectoryData
from ..dictionary import Dictionary
from ..errors import ContractError
from ..optimizers import GradientOracle, OptimizerConfig, alternating_adam
from .sparsify import stlsq

__all__ = [
    "SindyModel",
    "SindyOracle",
    "sindy_solve",
    "sindy_loss",
    "sindy_error",
    "grad_Xi",
    "sindy_grad_psi",
    "sindy_grad_w",
    "per_sample_sindy_loss",
    "fit_sindy",
    "fit_parametric_sindy",
    "landscape_scan",
    "threshold_sindy",
]


def _pair(Xdot, Psi_x):
    Xd = linalg.as_matrix(Xdot, "Xdot")
    Px = linalg.as_matrix(Psi_x, "Psi_x")
    if Xd.shape[1] != Px.shape[1]:
        raise ContractError(f"Xdot has {Xd.shape[1]} samples, Psi_x has {Px.shape[1]}")
    return Xd, Px


def _check_xi(Xi, n, d):
    Xi = np.asarray(Xi, dtype=np.float64)
    if Xi.shape != (n, d):
        raise ContractError(f"Xi must have shape {(n, d)}, got {Xi.shape}")
    return Xi


def sindy_solve(Xdot, Psi_x, rcond=linalg.DEFAULT_RCOND):
    """Least-squares coefficients ``Xi = (Xdot Psi_x^+)^T``."""
    Xd, Px = _pair(Xdot, Psi_x)
    return linalg.lstsq(Px.T, Xd.T, rcond)


def sindy_loss(Xi, Psi_x, Xdot):
    """``||Xdot - Xi^T Psi_x||_F^2``."""
    Xd, Px = _pair(Xdot, Psi_x)
    R = Xd - _check_xi(Xi, Px.shape[0], Xd.shape[0]).T @ Px
    return float(np.sum(R * R))


def sindy_error(Xi, Psi_x, Xdot):
    return float(np.sqrt(sindy_loss(Xi, Psi_x, Xdot)))


def grad_Xi(Xi, Psi_x, Xdot):
    """Gradient ``2 (Psi_x Psi_x^T Xi - Psi_x Xdot^T)`` of the loss, shape ``(n, d)``."""
    Xd, Px = _pair(Xdot, Psi_x)
    Xi = _check_xi(Xi, Px.shape[0], Xd.shape[0])
    return 2.0 * (Px @ (Px.T @ Xi) - Px @ Xd.T)


def sindy_grad_psi(Xi, Psi_x, Xdot):
    """Derivative of the loss with respect to every entry of ``Psi_x``: ``-2 Xi R``."""
    R = Xdot - Xi.T @ Psi_x
    return -2.0 * (Xi @ R)


def sindy_grad_w(dictionary, X, Xdot, Xi, w=None):
    """Gradient of the SINDy loss with respect to the flat dictionary parameters."""
    w = dictionary.initial_params() if w is None else np.asarray(w, dtype=np.float64)
    if dictionary.n_params == 0:
        return np.zeros(0)
    Psi, J = dictionary.evaluate_with_jacobian(X, w)
    Xd, Px = _pair(Xdot, Psi)
    Xi = _check_xi(Xi, Px.shape[0], Xd.shape[0])
    return J.contract(sindy_grad_psi(Xi, Px, Xd)) * dictionary.trainable_mask()


def per_sample_sindy_loss(Xi, Psi_x, Xdot, i):
    """Contribution ``||xdot_i - Xi^T psi(x_i)||^2`` of sample ``i``."""
    m = Psi_x.shape[1]
    if not 0 <= i < m:
        raise ContractError(f"sample index {i} out of range [0, {m})")
    r = Xdot[:, i] - Xi.T @ Psi_x[:, i]
    return float(r @ r)


class SindyOracle(GradientOracle):
    """Batch gradients of the SINDy loss with respect to ``Xi`` at fixed features."""

    def __init__(self, Psi_x, Xdot, scale=1.0):
        self.Xdot, self.Psi_x = _pair(Xdot, Psi_x)
        self.n_samples = self.Psi_x.shape[1]
        self.scale = scale

    def batch_gradient(self, Xi, idx):
        if idx is None:
            Px, Xd = self.Psi_x, self.Xdot
        else:
            Px, Xd = self.Psi_x[:, idx], self.Xdot[:, idx]
        return self.scale * 2.0 * (Px @ (Px.T @ Xi) - Px @ Xd.T)

    def loss(self, Xi):
        return self.scale * sindy_loss(Xi, self.Psi_x, self.Xdot)


@dataclass
class SindyModel:
    """Fitted ODE model ``xdot = Xi^T psi(x, w)``."""

    dictionary: Dictionary
    w: np.ndarray
    Xi: np.ndarray
    var_names: list = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.Xi = np.atleast_2d(np.asarray(self.Xi, dtype=np.float64))
        if self.Xi.shape[0] != len(self.dictionary):
            raise ContractError(
                f"Xi has {self.Xi.shape[0]} rows, dictionary has {len(self.dictionary)} functions"
            )
        if not np.all(np.isfinite(self.Xi)):
            raise ContractError("Xi contains non-finite entries")
        if self.var_names is None:
            self.var_names = self.dictionary.var_names or [f"x{k + 1}" for k in range(self.dim)]

    @property
    def dim(self):
        return self.Xi.shape[1]

    @property
    def labels(self):
        return self.dictionary.labels(self.w)

    def rhs(self, X):
        """Model right-hand side ``Xi^T psi(X)`` for ``X`` of shape ``(d, m)``."""
        return self.Xi.T @ self.dictionary.evaluate(X, self.w)

    def equations(self, precision=16):
        from .equations import format_sindy

        return format_sindy(self, precision)


def _derivative_data(data):
    if not isinstance(data, TrajectoryData) or data.Xdot is None:
        raise ContractError("SINDy needs derivative data (X, Xdot)")
    return data.X, data.Xdot


def fit_sindy(data, dictionary, w=None, rcond=linalg.DEFAULT_RCOND):
    """Standard SINDy regression with the dictionary frozen at ``w``."""
    X, Xd = _derivative_data(data)
    w = dictionary.initial_params() if w is None else np.asarray(w, dtype=np.float64)
    Xi = sindy_solve(Xd, dictionary.evaluate(X, w), rcond)
    return SindyModel(dictionary, w, Xi, provenance={"fit": "sindy"})


def threshold_sindy(model, data, threshold=0.05, rcond=linalg.DEFAULT_RCOND):
    """Hard-threshold each equation relative to its largest coefficient and refit.

    Every column of ``Xi`` is sparsified independently with :func:`stlsq`
    against the training features at ``model.w``.
    """
    X, Xd = _derivative_data(data)
    Theta = model.dictionary.evaluate(X, model.w).T
    Xi = np.column_stack(
        [stlsq(Theta, Xd[k], model.Xi[:, k], threshold, rcond) for k in range(model.dim)]
    )
    prov = dict(model.provenance, threshold=threshold)
    return SindyModel(model.dictionary, model.w.copy(), Xi, list(model.var_names), prov)


def fit_parametric_sindy(data, dictionary, w0=None, Xi0=None, config=None, threshold=None,
                         rcond=linalg.DEFAULT_RCOND, stop_on_plateau=True, callback=None):
    """Learn ``Xi`` and the dictionary parameters jointly with alternating Adam.

    Both blocks descend the squared SINDy residual.  ``Xi0=None`` starts from
    the least-squares solution at ``w0``.  With ``threshold`` set, a
    hard-threshold-and-refit pass (:func:`threshold_sindy`) runs after the
    loop.  History records carry the unsquared residual in both loss slots;
    ``callback(it, Xi, w)`` is passed on to
    :func:`~dictopt.optimizers.alternating_adam`.
    """
    X, Xd = _derivative_data(data)
    cfg = config or OptimizerConfig()
    w0 = dictionary.initial_params() if w0 is None else np.asarray(w0, dtype=np.float64)
    mask = dictionary.trainable_mask()
    cache = {}

    def features(w):
        key = w.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = dictionary.evaluate_with_jacobian(X, w, skip_frozen=True)
        return cache[key]

    Xi0 = sindy_solve(Xd, features(w0)[0], rcond) if Xi0 is None else np.asarray(Xi0, dtype=np.float64)

    def grad_A(Xi, w):
        return grad_Xi(Xi, features(w)[0], Xd)

    def grad_w(Xi, w):
        Psi, J = features(w)
        return J.contract(sindy_grad_psi(Xi, Psi, Xd)) * mask

    def loss(Xi, w):
        return sindy_error(Xi, features(w)[0], Xd)

    Xi, w, history = alternating_adam(Xi0, w0, grad_A, grad_w, cfg, loss, loss,
                                      stop_on_plateau=stop_on_plateau, callback=callback)
    prov = {
        "fit": "sindy",
        "optimizer": cfg.to_dict(),
        "iterations": history[-1].iteration,
        "final_loss": sindy_loss(Xi, features(w)[0], Xd),
        "final_error": history[-1].loss_1,
        "data": dict(data.meta),
    }
    model = SindyModel(dictionary, w, Xi, provenance=prov)
    if threshold is not None:
        model = threshold_sindy(model, data, threshold, rcond)
    return model, history


def landscape_scan(data, dictionary, index, values, w=None, rcond=linalg.DEFAULT_RCOND):
    """Squared SINDy loss at the closed-form ``Xi`` while sweeping one parameter.

    ``index`` is a position in the flat parameter vector; the other entries
    stay at ``w``.  Returns an array of shape ``(len(values), 2)`` with
    columns (parameter value, loss).
    """
    X, Xd = _derivative_data(data)
    base = dictionary.initial_params() if w is None else np.asarray(w, dtype=np.float64)
    if not 0 <= index < base.size:
        raise ContractError(f"parameter index {index} out of range [0, {base.size})")
    values = np.asarray(values, dtype=np.float64).ravel()
    out = np.empty((values.size, 2))
    for k, v in enumerate(values):
        wk = base.copy()
        wk[index] = v
        Psi = dictionary.evaluate(X, wk)
        out[k] = v, sindy_loss(sindy_solve(Xd, Psi, rcond), Psi, Xd)
    return out
