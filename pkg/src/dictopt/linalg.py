"""Dense real-matrix kernel: pseudoinverse, least squares, eigendecomposition.

Thin wrappers around LAPACK (through numpy) that pin down cutoffs, error
types and eigenvalue ordering so that the rest of the package behaves
deterministically.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericFailure

DEFAULT_RCOND = 1e-12
SYMMETRY_RTOL = 1e-10

__all__ = [
    "ComplexSpectrum",
    "as_matrix",
    "pinv",
    "lstsq",
    "eig",
    "inv_sqrt_psd",
    "sym_pinv",
    "normalize_eigenvectors",
]


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenpairs sorted by descending modulus, ties by descending real part.

    ``eigenvectors[:, i]`` belongs to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)


def as_matrix(a, name="a"):
    """Return ``a`` as a finite 2-d float64 array, raising ContractError otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-d, got shape {arr.shape}")
    if arr.size == 0:
        raise ContractError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains NaN or Inf entries")
    return arr


def _svd(a):
    try:
        return np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        # LAPACK does not report the sweep count through numpy
        raise NumericFailure(f"SVD did not converge: {exc}", iterations=None) from exc


def _check_rcond(rcond):
    if not 0.0 <= rcond < 1.0:
        raise ContractError(f"rcond must lie in [0, 1), got {rcond}")


def pinv(a, rcond=DEFAULT_RCOND):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rcond * sigma_max`` are treated as zero, as are
    subnormal ones whose reciprocal would overflow.
    """
    a = as_matrix(a)
    _check_rcond(rcond)
    u, s, vt = _svd(a)
    cutoff = max(rcond * (s[0] if s.size else 0.0), np.finfo(np.float64).tiny)
    keep = s > cutoff
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (vt.T * s_inv) @ u.T


def lstsq(a, b, rcond=DEFAULT_RCOND):
    """Minimum-norm least-squares solution of ``a @ x = b``.

    ``b`` may be a vector or a matrix; the result has the matching rank.
    """
    a = as_matrix(a)
    b_arr = np.asarray(b, dtype=np.float64)
    vector = b_arr.ndim == 1
    b2 = b_arr[:, None] if vector else b_arr
    if b2.ndim != 2 or b2.shape[0] != a.shape[0]:
        raise ContractError(f"row mismatch: a is {a.shape}, b is {b_arr.shape}")
    if not np.all(np.isfinite(b2)):
        raise ContractError("b contains NaN or Inf entries")
    x = pinv(a, rcond) @ b2
    return x[:, 0] if vector else x


def normalize_eigenvectors(vectors, tol=1e-10):
    """Scale columns to unit 2-norm with the first non-negligible entry real positive."""
    v = np.array(vectors, dtype=np.complex128, copy=True)
    for j in range(v.shape[1]):
        col = v[:, j]
        norm = np.linalg.norm(col)
        if norm == 0.0:
            continue
        col = col / norm
        mags = np.abs(col)
        k = int(np.argmax(mags > tol * mags.max()))
        col = col * (np.conj(col[k]) / mags[k])
        v[:, j] = col
    return v


def eig(a):
    """Eigendecomposition of a real square matrix.

    Eigenvalues come back in descending modulus, ties broken by descending
    real part and then descending imaginary part, so complex-conjugate pairs
    are adjacent with the positive imaginary part first.  Eigenvectors are
    unit-norm with their first nonzero component real and positive.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"eig needs a square matrix, got {a.shape}")
    try:
        lam, vec = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigendecomposition did not converge: {exc}") from exc
    lam = lam.astype(np.complex128)
    order = np.lexsort((-lam.imag, -lam.real, -np.abs(lam)))
    return ComplexSpectrum(lam[order], normalize_eigenvectors(vec[:, order]))


def _symmetrized(a, name="a"):
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be square, got {a.shape}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise ContractError(f"{name} is not symmetric to relative tolerance {SYMMETRY_RTOL}")
    return 0.5 * (a + a.T)


def _sym_power(a, ridge, rcond, power):
    if ridge < 0:
        raise ContractError(f"ridge must be nonnegative, got {ridge}")
    _check_rcond(rcond)
    s = _symmetrized(a)
    n = s.shape[0]
    try:
        lam, q = np.linalg.eigh(s + ridge * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"symmetric eigendecomposition failed: {exc}") from exc
    top = lam.max()
    keep = lam > rcond * top if top > 0 else np.zeros(n, dtype=bool)
    f = np.zeros_like(lam)
    f[keep] = lam[keep] ** power
    return (q * f) @ q.T


def inv_sqrt_psd(a, ridge=0.0, rcond=DEFAULT_RCOND):
    """Pseudo-inverse square root ``(a + ridge*I)^(-1/2)`` of a symmetric PSD matrix.

    Eigenvalues below ``rcond * lambda_max`` are mapped to zero.
    """
    return _sym_power(a, ridge, rcond, -0.5)


def sym_pinv(a, ridge=0.0, rcond=DEFAULT_RCOND):
    """Pseudoinverse of ``a + ridge*I`` for symmetric PSD ``a`` (same cutoff as inv_sqrt_psd)."""
    return _sym_power(a, ridge, rcond, -1.0)
