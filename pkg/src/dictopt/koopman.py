"""EDMD and parametric EDMD.

Conventions: feature matrices ``Psi_x, Psi_y`` are ``(n, m)``; the Koopman
matrix ``K`` satisfies ``Psi_y ~ K^T Psi_x``.  Covariances are the raw
products ``Psi Psi^T`` without division by ``m``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .data import TrajectoryData
from .dictionary import Dictionary
from .errors import ContractError
from .optimizers import (
    GradientOracle,
    OptimizerConfig,
    alternating_adam,
    default_step_size,
    run_single_block,
)

__all__ = [
    "CovarianceSet",
    "KoopmanModel",
    "SpectralResult",
    "covariances",
    "edmd_solve",
    "reconstruction_loss",
    "reconstruction_error",
    "grad_K",
    "per_sample_loss",
    "ReconstructionOracle",
    "vamp2_score",
    "vamp2_trace",
    "vamp2_grad_psi",
    "vamp2_grad_w",
    "default_ridge",
    "spectral_decompose",
    "fit_parametric_edmd",
    "fit_edmd",
    "solve_K_iterative",
    "relative_error",
]

RIDGE_SCALE = 1e-8


def _pair(Psi_x, Psi_y):
    Px = linalg.as_matrix(Psi_x, "Psi_x")
    Py = linalg.as_matrix(Psi_y, "Psi_y")
    if Px.shape != Py.shape:
        raise ContractError(f"Psi_x {Px.shape} and Psi_y {Py.shape} differ in shape")
    return Px, Py


@dataclass
class CovarianceSet:
    cxx: np.ndarray
    cxy: np.ndarray
    cyy: np.ndarray
    ridge: float
    sample_count: int

    @property
    def cyx(self):
        return self.cxy.T


def covariances(Psi_x, Psi_y, ridge=0.0):
    """Uncentered, unnormalized covariances ``Cxx, Cxy, Cyy``."""
    Px, Py = _pair(Psi_x, Psi_y)
    if ridge < 0:
        raise ContractError("ridge must be nonnegative")
    return CovarianceSet(Px @ Px.T, Px @ Py.T, Py @ Py.T, float(ridge), Px.shape[1])


def default_ridge(Psi_x, scale=RIDGE_SCALE):
    """``scale * tr(Cxx) / n`` with ``scale`` defaulting to 1e-8."""
    Px = np.asarray(Psi_x, dtype=np.float64)
    return scale * float(np.sum(Px * Px)) / Px.shape[0]


def edmd_solve(Psi_x, Psi_y, rcond=linalg.DEFAULT_RCOND):
    """Closed-form EDMD matrix ``K = (Psi_y Psi_x^+)^T``."""
    Px, Py = _pair(Psi_x, Psi_y)
    return linalg.lstsq(Px.T, Py.T, rcond)


def reconstruction_loss(K, Psi_x, Psi_y):
    """Squared Frobenius residual ``||Psi_y - K^T Psi_x||_F^2``."""
    R = Psi_y - K.T @ Psi_x
    return float(np.sum(R * R))


def reconstruction_error(K, Psi_x, Psi_y):
    """Unsquared Frobenius residual, as reported in fit histories."""
    return float(np.sqrt(reconstruction_loss(K, Psi_x, Psi_y)))


def grad_K(K, Psi_x, Psi_y):
    """Gradient of the squared residual: ``2 (Cxx K - Cxy)``."""
    return 2.0 * (Psi_x @ (Psi_x.T @ K) - Psi_x @ Psi_y.T)


def per_sample_loss(K, Psi_x, Psi_y, i):
    """Contribution ``||psi(y_i) - K^T psi(x_i)||^2`` of sample ``i``."""
    m = Psi_x.shape[1]
    if not 0 <= i < m:
        raise ContractError(f"sample index {i} out of range [0, {m})")
    r = Psi_y[:, i] - K.T @ Psi_x[:, i]
    return float(r @ r)


class ReconstructionOracle(GradientOracle):
    """Batch gradients of ``scale * ||Psi_y - K^T Psi_x||_F^2`` with respect to ``K``."""

    def __init__(self, Psi_x, Psi_y, scale=1.0):
        self.Psi_x, self.Psi_y = _pair(Psi_x, Psi_y)
        self.n_samples = self.Psi_x.shape[1]
        self.scale = scale

    def batch_gradient(self, K, idx):
        if idx is None:
            Px, Py = self.Psi_x, self.Psi_y
        else:
            Px, Py = self.Psi_x[:, idx], self.Psi_y[:, idx]
        return self.scale * grad_K(K, Px, Py)

    def loss(self, K):
        return self.scale * reconstruction_loss(K, self.Psi_x, self.Psi_y)


def vamp2_score(Psi_x, Psi_y, ridge=0.0, rcond=linalg.DEFAULT_RCOND):
    """``||Cxx^{-1/2} Cxy Cyy^{-1/2}||_F^2`` with ridge-shifted pseudo-inverse square roots."""
    cov = covariances(Psi_x, Psi_y)
    Wx = linalg.inv_sqrt_psd(cov.cxx, ridge, rcond)
    Wy = linalg.inv_sqrt_psd(cov.cyy, ridge, rcond)
    M = Wx @ cov.cxy @ Wy
    return float(np.sum(M * M))


def _vamp2_parts(Psi_x, Psi_y, ridge, rcond):
    cov = covariances(Psi_x, Psi_y)
    Ai = linalg.sym_pinv(cov.cxx, ridge, rcond)
    Bi = linalg.sym_pinv(cov.cyy, ridge, rcond)
    return cov, Ai, Bi


def vamp2_trace(Psi_x, Psi_y, ridge=0.0, rcond=linalg.DEFAULT_RCOND):
    """Trace form ``tr(Cxx^+ Cxy Cyy^+ Cyx)`` of the VAMP-2 score."""
    Px, Py = _pair(Psi_x, Psi_y)
    cov, Ai, Bi = _vamp2_parts(Px, Py, ridge, rcond)
    C = cov.cxy
    return float(np.sum((Ai @ C @ Bi) * C))


def vamp2_grad_psi(Psi_x, Psi_y, ridge=0.0, rcond=linalg.DEFAULT_RCOND):
    """Derivatives of the trace-form score with respect to every entry of ``Psi_x`` and ``Psi_y``.

    With ``A = Cxx + rI``, ``B = Cyy + rI``, ``C = Cxy`` and ``M = A^-1 C B^-1``::

        dR/dPsi_x = -2 M C^T A^-1 Psi_x + 2 M Psi_y
        dR/dPsi_y = -2 B^-1 C^T M Psi_y + 2 M^T Psi_x

    The ridge ``r`` is held constant.
    """
    Px, Py = _pair(Psi_x, Psi_y)
    cov, Ai, Bi = _vamp2_parts(Px, Py, ridge, rcond)
    C = cov.cxy
    M = Ai @ C @ Bi
    GA = -M @ C.T @ Ai
    GB = -Bi @ C.T @ M
    dPx = 2.0 * (GA @ Px) + 2.0 * (M @ Py)
    dPy = 2.0 * (GB @ Py) + 2.0 * (M.T @ Px)
    return dPx, dPy


def vamp2_grad_w(dictionary, X, Y, w=None, ridge=0.0, rcond=linalg.DEFAULT_RCOND):
    """Gradient of the VAMP-2 score with respect to the flat parameters.

    Frozen parameters (``dictionary.trainable_mask()``) get a zero entry.
    """
    w = dictionary.initial_params() if w is None else np.asarray(w, dtype=np.float64)
    if dictionary.n_params == 0:
        return np.zeros(0)
    Px, Py = dictionary.evaluate(X, w), dictionary.evaluate(Y, w)
    dPx, dPy = vamp2_grad_psi(Px, Py, ridge, rcond)
    g = dictionary.param_jacobian(X, w).contract(dPx) + dictionary.param_jacobian(Y, w).contract(dPy)
    return g * dictionary.trainable_mask()


@dataclass
class SpectralResult:
    """Eigenvalues of ``K`` with the coefficient vectors of the eigenfunctions.

    ``coefficient_vectors[:, i]`` is the eigenvector ``v_i`` of ``K`` (unit norm,
    first nonzero entry real positive); ``phi_i(x) = v_i^T psi(x, w)``.
    """

    eigenvalues: np.ndarray
    coefficient_vectors: np.ndarray
    dictionary: Dictionary
    w: np.ndarray

    def eigenfunctions(self, X, which=None, parts=False):
        """Evaluate eigenfunctions on ``X`` ``(d, m)``; returns ``(k, m)``.

        Complex values are returned unless all selected modes are real; with
        ``parts=True`` the result is ``(real, imag)``.
        """
        V = self.coefficient_vectors
        if which is not None:
            V = V[:, np.atleast_1d(which)]
        vals = V.T @ self.dictionary.evaluate(X, self.w)
        if parts:
            return vals.real, vals.imag
        if np.all(np.abs(vals.imag) <= 1e-12 * max(np.abs(vals).max(), 1.0)):
            return vals.real
        return vals

    def __len__(self):
        return len(self.eigenvalues)


@dataclass
class KoopmanModel:
    dictionary: Dictionary
    w: np.ndarray
    K: np.ndarray
    lag_time: float = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.K = np.asarray(self.K, dtype=np.float64)
        n = len(self.dictionary)
        if self.K.shape != (n, n):
            raise ContractError(f"K has shape {self.K.shape}, dictionary has {n} functions")
        if not np.all(np.isfinite(self.K)):
            raise ContractError("K contains non-finite entries")

    def transform(self, X):
        return self.dictionary.evaluate(X, self.w)

    def spectrum(self):
        return spectral_decompose(self)


def spectral_decompose(model):
    spec = linalg.eig(model.K)
    return SpectralResult(spec.eigenvalues, spec.eigenvectors, model.dictionary, model.w.copy())


def relative_error(K, K_ref):
    """``||K - K_ref||_F / ||K_ref||_F``."""
    return float(np.linalg.norm(K - K_ref) / np.linalg.norm(K_ref))


def fit_edmd(data, dictionary, w=None, rcond=linalg.DEFAULT_RCOND):
    """Standard EDMD with the dictionary frozen at ``w``."""
    w = dictionary.initial_params() if w is None else np.asarray(w, dtype=np.float64)
    Px, Py = dictionary.evaluate(data.X, w), dictionary.evaluate(data.Y, w)
    return KoopmanModel(dictionary, w, edmd_solve(Px, Py, rcond), data.tau)


def solve_K_iterative(Psi_x, Psi_y, method="gd", h=None, iters=10_000, K0=None,
                      config=None, callback=None):
    """Approximate the EDMD matrix by first-order iterations on a fixed dictionary.

    The iterations descend ``0.5 * ||Psi_y - K^T Psi_x||_F^2`` (gradient
    ``Cxx K - Cxy``), for which ``h = 1 / lambda_max(Cxx)`` is the stable
    textbook step; it is the default.  ``method`` is one of 'gd', 'sgd',
    'nesterov' or 'adam'.  Returns ``(K, steps_taken)``.
    """
    oracle = ReconstructionOracle(Psi_x, Psi_y, scale=0.5)
    h = default_step_size(oracle.Psi_x) if h is None else h
    n = oracle.Psi_x.shape[0]
    K0 = np.zeros((n, n)) if K0 is None else K0
    cfg = config or OptimizerConfig(step_size=h)
    return run_single_block(K0, oracle, method, h, iters, cfg, callback)


class _FeatureCache:
    """Memoizes features and Jacobians for the most recent parameter vectors."""

    def __init__(self, dictionary, X, Y):
        self.dictionary, self.X, self.Y = dictionary, X, Y
        self._psi = {}
        self._jac = {}

    @staticmethod
    def _key(w):
        return np.asarray(w, dtype=np.float64).tobytes()

    def features(self, w):
        k = self._key(w)
        if k not in self._psi:
            if len(self._psi) > 3:
                self._psi.clear()
            d = self.dictionary
            self._psi[k] = (d.evaluate(self.X, w), d.evaluate(self.Y, w))
        return self._psi[k]

    def jacobians(self, w):
        k = self._key(w)
        if k not in self._jac:
            self._jac.clear()
            d = self.dictionary
            Px, Jx = d.evaluate_with_jacobian(self.X, w, skip_frozen=True)
            Py, Jy = d.evaluate_with_jacobian(self.Y, w, skip_frozen=True)
            self._psi.setdefault(k, (Px, Py))
            self._jac[k] = (Jx, Jy)
        return self._jac[k]


def fit_parametric_edmd(data, dictionary, w0=None, K0=None, config=None, ridge=None,
                        rcond=linalg.DEFAULT_RCOND, stop_on_plateau=True, callback=None,
                        refit=False):
    """Jointly learn ``K`` and the dictionary parameters with alternating Adam.

    ``K`` follows the gradient of the squared reconstruction residual and
    ``w`` ascends the VAMP-2 score.  ``K0=None`` starts from the closed-form
    EDMD solution at ``w0``.  ``ridge=None`` fixes the whitening ridge to
    ``1e-8 * tr(Cxx(w0)) / n`` for the whole run.

    History records carry the unsquared reconstruction error as ``loss_1``
    and the VAMP-2 score as ``loss_2``.  ``callback(it, K, w)`` is passed on
    to :func:`~dictopt.optimizers.alternating_adam`.

    With ``refit=True`` the returned model carries the closed-form EDMD
    matrix at the final ``w`` instead of the Adam iterate; the relative gap
    between the two is kept in the provenance as ``adam_K_gap``.
    """
    if not isinstance(data, TrajectoryData) or data.Y is None:
        raise ContractError("parametric EDMD needs lagged (X, Y) data")
    cfg = config or OptimizerConfig()
    w0 = dictionary.initial_params() if w0 is None else np.asarray(w0, dtype=np.float64)
    cache = _FeatureCache(dictionary, data.X, data.Y)
    Px0, Py0 = cache.features(w0)
    if ridge is None:
        ridge = default_ridge(Px0)
    K0 = edmd_solve(Px0, Py0, rcond) if K0 is None else np.asarray(K0, dtype=np.float64)
    mask = dictionary.trainable_mask()

    def grad_A(K, w):
        Px, Py = cache.features(w)
        return grad_K(K, Px, Py)

    def grad_w(K, w):
        Px, Py = cache.features(w)
        dPx, dPy = vamp2_grad_psi(Px, Py, ridge, rcond)
        Jx, Jy = cache.jacobians(w)
        return -(Jx.contract(dPx) + Jy.contract(dPy)) * mask

    def loss_1(K, w):
        return reconstruction_error(K, *cache.features(w))

    def loss_2(K, w):
        return vamp2_trace(*cache.features(w), ridge, rcond)

    K, w, history = alternating_adam(K0, w0, grad_A, grad_w, cfg, loss_1, loss_2,
                                     stop_on_plateau=stop_on_plateau, callback=callback)
    prov = {
        "fit": "edmd",
        "optimizer": cfg.to_dict(),
        "ridge": ridge,
        "iterations": history[-1].iteration,
        "final_loss_1": history[-1].loss_1,
        "final_loss_2": history[-1].loss_2,
        "data": dict(data.meta),
    }
    if refit:
        K_closed = edmd_solve(*cache.features(w), rcond)
        prov["refit"] = True
        prov["adam_K_gap"] = relative_error(K, K_closed)
        K = K_closed
    return KoopmanModel(dictionary, w, K, data.tau, prov), history
