"""Sequential hard thresholding with least-squares refit, and library diagnostics."""

import numpy as np

from .. import linalg
from ..errors import ContractError, DegenerateModelError

__all__ = ["stlsq", "condition_number"]


def stlsq(Theta, b, coef, threshold=0.05, rcond=linalg.DEFAULT_RCOND, max_rounds=100):
    """Zero small coefficients, refit the survivors, repeat until nothing changes.

    A coefficient is removed when ``|c_j| < threshold * max|c|``.  After each
    removal round the surviving coefficients are refit by least squares on
    their columns of ``Theta`` ``(m, p)`` against ``b`` ``(m,)``.

    Raises
    ------
    DegenerateModelError
        If every coefficient is removed.
    """
    if threshold < 0:
        raise ContractError(f"threshold must be nonnegative, got {threshold}")
    Theta = linalg.as_matrix(Theta, "Theta")
    b = np.asarray(b, dtype=np.float64).ravel()
    c = np.array(coef, dtype=np.float64).ravel()
    if c.size != Theta.shape[1] or b.size != Theta.shape[0]:
        raise ContractError(f"Theta {Theta.shape}, target {b.shape} and coefficients {c.shape} disagree")
    support = np.ones(c.size, dtype=bool)
    for _ in range(max_rounds):
        top = np.max(np.abs(c[support])) if support.any() else 0.0
        drop = support & (np.abs(c) < threshold * top)
        if not drop.any():
            break
        support &= ~drop
        c = np.zeros_like(c)
        if not support.any():
            raise DegenerateModelError("thresholding removed every term")
        c[support] = linalg.lstsq(Theta[:, support], b, rcond)
    c[~support] = 0.0
    if not support.any():
        raise DegenerateModelError("thresholding removed every term")
    return c


def condition_number(Theta, rcond=linalg.DEFAULT_RCOND):
    """``sigma_max / sigma_min`` of ``Theta``; ``inf`` when ``sigma_min <= rcond * sigma_max``."""
    s = np.linalg.svd(linalg.as_matrix(Theta, "Theta"), compute_uv=False)
    if s[0] == 0.0 or s[-1] <= rcond * s[0]:
        return float("inf")
    return float(s[0] / s[-1])
