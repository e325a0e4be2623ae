"""Parametric basis functions and dictionaries.

A :class:`Dictionary` is an ordered list of basis functions
``psi_i(x, w_i)``.  The per-function parameters are packed into one flat
vector ``w`` (see :attr:`Dictionary.offsets`), which is what the optimizers
update.  Gaussian bandwidths are stored as ``log(sigma)`` so that any real
value of the flat vector is a valid dictionary.

Data matrices are column-per-sample: ``X`` has shape ``(d, m)`` and
``evaluate`` returns ``Psi`` of shape ``(n, m)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericFailure

__all__ = [
    "BasisFunction",
    "Constant",
    "Coordinate",
    "Monomial",
    "GaussianRBF",
    "SineFreq",
    "CosineFreq",
    "ExpRate",
    "Product",
    "Dictionary",
    "BlockJacobian",
    "evaluate",
    "param_jacobian",
    "state_jacobian",
    "gaussian_dictionary",
]


def _fmt(v):
    return format(float(v), ".6g")


class BasisFunction:
    """Base class; subclasses define one family.

    ``params`` holds the initial (internal) parameter values and
    ``trainable`` a boolean mask of the same length.
    """

    tag = None

    def __init__(self, params=(), trainable=None):
        self.params = np.asarray(params, dtype=np.float64).ravel()
        if trainable is None:
            trainable = self.default_trainable()
        mask = np.broadcast_to(np.asarray(trainable, dtype=bool), self.params.shape)
        self.trainable = mask.copy()

    def default_trainable(self):
        return np.ones(self.params.shape, dtype=bool)

    @property
    def n_params(self):
        return self.params.size

    def min_dim(self):
        """Smallest state dimension the function can be evaluated on."""
        return 0

    # subclasses implement value / param_jac / state_jac / label / _spec_fields
    def value(self, X, w):
        raise NotImplementedError

    def param_jac(self, X, w):
        """Return the ``(p_i, m)`` derivative of the values w.r.t. own parameters."""
        raise NotImplementedError

    def state_jac(self, X, w):
        """Return the ``(d, m)`` derivative of the values w.r.t. the state."""
        raise NotImplementedError

    def label(self, w, names):
        raise NotImplementedError

    def to_spec(self):
        spec = {"family": self.tag, "params": self.params.tolist()}
        spec["trainable"] = self.trainable.tolist()
        spec.update(self._spec_fields())
        return spec

    def _spec_fields(self):
        return {}

    def with_params(self, w):
        """Copy of this function whose stored parameters are ``w``."""
        clone = self._clone()
        clone.params = np.asarray(w, dtype=np.float64).copy()
        return clone

    def _clone(self):
        import copy

        return copy.deepcopy(self)

    def __repr__(self):
        return f"{type(self).__name__}({self.label(self.params, None)})"


def _var(names, k):
    return names[k] if names is not None else f"x{k + 1}"


class Constant(BasisFunction):
    tag = "constant"

    def __init__(self, trainable=None):
        super().__init__((), trainable)

    def value(self, X, w):
        return np.ones(X.shape[1])

    def param_jac(self, X, w):
        return np.zeros((0, X.shape[1]))

    def state_jac(self, X, w):
        return np.zeros(X.shape)

    def label(self, w, names):
        return "1"


class Coordinate(BasisFunction):
    tag = "coordinate"

    def __init__(self, index, trainable=None):
        self.index = int(index)
        super().__init__((), trainable)

    def min_dim(self):
        return self.index + 1

    def value(self, X, w):
        return X[self.index].copy()

    def param_jac(self, X, w):
        return np.zeros((0, X.shape[1]))

    def state_jac(self, X, w):
        J = np.zeros(X.shape)
        J[self.index] = 1.0
        return J

    def label(self, w, names):
        return _var(names, self.index)

    def _spec_fields(self):
        return {"index": self.index}


class Monomial(BasisFunction):
    """Product of powers ``prod_k x_k**a_k``.

    The exponents are parameters but frozen by default.  Their derivative
    ``psi * log|x_k|`` is only meaningful for positive coordinates.
    """

    tag = "monomial"

    def __init__(self, exponents, trainable=None):
        super().__init__(exponents, trainable)

    def default_trainable(self):
        return np.zeros(self.params.shape, dtype=bool)

    def min_dim(self):
        nz = np.flatnonzero(self.params)
        return int(nz[-1]) + 1 if nz.size else 0

    def _powers(self, X, w):
        out = np.ones((w.size, X.shape[1]))
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            for k, a in enumerate(w):
                if a == 0:
                    continue
                # integer exponents avoid the slow general pow
                out[k] = X[k] ** int(a) if float(a).is_integer() else np.power(X[k], a)
        return out

    def value(self, X, w):
        return np.prod(self._powers(X, w), axis=0)

    def param_jac(self, X, w):
        k = w.size
        val = self.value(X, w)
        ax = np.abs(X[:k])
        logs = np.zeros_like(ax)
        np.log(ax, out=logs, where=ax > 0)
        return val[None, :] * logs

    def state_jac(self, X, w):
        d, m = X.shape
        k = w.size
        P = self._powers(X, w)
        J = np.zeros((d, m))
        with np.errstate(invalid="ignore", divide="ignore"):
            for j in range(k):
                if w[j] == 0:
                    continue
                others = np.prod(np.delete(P, j, axis=0), axis=0) if k > 1 else 1.0
                J[j] = w[j] * np.power(X[j], w[j] - 1.0) * others
        return J

    def label(self, w, names):
        parts = []
        for k, a in enumerate(w):
            if a == 0:
                continue
            v = _var(names, k)
            if a == 1:
                parts.append(v)
            elif float(a).is_integer():
                parts.append(f"{v}^{int(a)}")
            else:
                parts.append(f"{v}^{_fmt(a)}")
        return "*".join(parts) if parts else "1"


class GaussianRBF(BasisFunction):
    """Isotropic Gaussian ``exp(-|x - c|^2 / (2 sigma^2))``.

    Internal parameters are ``[c_1, ..., c_d, log(sigma)]``.
    """

    tag = "gaussian"

    def __init__(self, center, bandwidth, trainable=None):
        center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if not bandwidth > 0:
            raise ContractError(f"bandwidth must be positive, got {bandwidth}")
        super().__init__(np.concatenate([center, [np.log(bandwidth)]]), trainable)

    @classmethod
    def from_internal(cls, params, trainable=None):
        params = np.asarray(params, dtype=np.float64)
        return cls(params[:-1], float(np.exp(params[-1])), trainable)

    @property
    def dim(self):
        return self.params.size - 1

    def min_dim(self):
        return self.dim

    def center(self, w=None):
        w = self.params if w is None else w
        return w[:-1]

    def bandwidth(self, w=None):
        w = self.params if w is None else w
        return float(np.exp(w[-1]))

    def _parts(self, X, w):
        c = w[:-1]
        s2 = np.exp(2.0 * w[-1])
        diff = X[: c.size] - c[:, None]
        r2 = np.sum(diff * diff, axis=0)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = np.exp(-0.5 * r2 / s2)
        return diff, r2, s2, val

    def value(self, X, w):
        return self._parts(X, w)[3]

    def param_jac(self, X, w):
        diff, r2, s2, val = self._parts(X, w)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.vstack([val * diff / s2, (val * r2 / s2)[None, :]])

    def state_jac(self, X, w):
        diff, r2, s2, val = self._parts(X, w)
        J = np.zeros(X.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            J[: diff.shape[0]] = -val * diff / s2
        return J

    def label(self, w, names):
        c = ",".join(_fmt(v) for v in w[:-1])
        return f"gauss(c=[{c}],s={_fmt(np.exp(w[-1]))})"


class _Trig(BasisFunction):
    """``f(freq . x + phase)``; internal parameters ``[freq_1..freq_d, phase]``."""

    def __init__(self, frequency, phase=0.0, trainable=None):
        freq = np.atleast_1d(np.asarray(frequency, dtype=np.float64))
        super().__init__(np.concatenate([freq, [phase]]), trainable)

    def min_dim(self):
        return self.params.size - 1

    def _arg(self, X, w):
        f = w[:-1]
        return f @ X[: f.size] + w[-1]

    def _inner_label(self, w, names):
        terms = []
        for k, f in enumerate(w[:-1]):
            if f != 0:
                terms.append(f"{_fmt(f)}*{_var(names, k)}")
        if w[-1] != 0 or not terms:
            terms.append(_fmt(w[-1]))
        return " + ".join(terms)


class SineFreq(_Trig):
    tag = "sine"

    def value(self, X, w):
        return np.sin(self._arg(X, w))

    def param_jac(self, X, w):
        s = np.cos(self._arg(X, w))
        k = w.size - 1
        return np.vstack([s * X[:k], s[None, :]])

    def state_jac(self, X, w):
        s = np.cos(self._arg(X, w))
        J = np.zeros(X.shape)
        J[: w.size - 1] = w[:-1, None] * s
        return J

    def label(self, w, names):
        return f"sin({self._inner_label(w, names)})"


class CosineFreq(_Trig):
    tag = "cosine"

    def value(self, X, w):
        return np.cos(self._arg(X, w))

    def param_jac(self, X, w):
        s = -np.sin(self._arg(X, w))
        k = w.size - 1
        return np.vstack([s * X[:k], s[None, :]])

    def state_jac(self, X, w):
        s = -np.sin(self._arg(X, w))
        J = np.zeros(X.shape)
        J[: w.size - 1] = w[:-1, None] * s
        return J

    def label(self, w, names):
        return f"cos({self._inner_label(w, names)})"


class ExpRate(BasisFunction):
    """``exp(rate * x_k)`` with a single parameter ``rate``."""

    tag = "exp"

    def __init__(self, rate, index=0, trainable=None):
        self.index = int(index)
        super().__init__([rate], trainable)

    def min_dim(self):
        return self.index + 1

    def value(self, X, w):
        with np.errstate(over="ignore"):
            return np.exp(w[0] * X[self.index])

    def param_jac(self, X, w):
        return (X[self.index] * self.value(X, w))[None, :]

    def state_jac(self, X, w):
        J = np.zeros(X.shape)
        J[self.index] = w[0] * self.value(X, w)
        return J

    def label(self, w, names):
        return f"exp({_fmt(w[0])}*{_var(names, self.index)})"

    def _spec_fields(self):
        return {"index": self.index}


class Product(BasisFunction):
    """Pointwise product of factor functions; parameters are concatenated."""

    tag = "product"

    def __init__(self, factors, trainable=None):
        self.factors = list(factors)
        if not self.factors:
            raise ContractError("Product needs at least one factor")
        params = np.concatenate([f.params for f in self.factors]) if self.factors else []
        if trainable is None:
            trainable = np.concatenate([f.trainable for f in self.factors])
        super().__init__(params, trainable)

    def min_dim(self):
        return max(f.min_dim() for f in self.factors)

    def _split(self, w):
        out, start = [], 0
        for f in self.factors:
            out.append(w[start : start + f.n_params])
            start += f.n_params
        return out

    def _values(self, X, w):
        return [f.value(X, wf) for f, wf in zip(self.factors, self._split(w))]

    @staticmethod
    def _others(vals, j):
        out = np.ones_like(vals[0])
        for l, v in enumerate(vals):
            if l != j:
                out = out * v
        return out

    def value(self, X, w):
        vals = self._values(X, w)
        return self._others(vals, -1)

    def param_jac(self, X, w):
        ws = self._split(w)
        vals = [f.value(X, wf) for f, wf in zip(self.factors, ws)]
        blocks = [
            self._others(vals, j)[None, :] * f.param_jac(X, wf)
            for j, (f, wf) in enumerate(zip(self.factors, ws))
        ]
        return np.vstack(blocks) if blocks else np.zeros((0, X.shape[1]))

    def state_jac(self, X, w):
        ws = self._split(w)
        vals = [f.value(X, wf) for f, wf in zip(self.factors, ws)]
        J = np.zeros(X.shape)
        for j, (f, wf) in enumerate(zip(self.factors, ws)):
            J += self._others(vals, j)[None, :] * f.state_jac(X, wf)
        return J

    def label(self, w, names):
        labels = [f.label(wf, names) for f, wf in zip(self.factors, self._split(w))]
        labels = [s for s in labels if s != "1"] or ["1"]
        return "*".join(labels)

    def to_spec(self):
        return {
            "family": self.tag,
            "trainable": self.trainable.tolist(),
            "factors": [f.to_spec() for f in self.factors],
        }

    def with_params(self, w):
        return Product([f.with_params(wf) for f, wf in zip(self.factors, self._split(w))],
                       trainable=self.trainable)


@dataclass
class BlockJacobian:
    """Parameter Jacobian of ``Psi`` stored per basis function.

    ``blocks[i]`` has shape ``(p_i, m)`` and holds ``d psi_i(x_j) / d w_k`` for
    ``k`` in basis ``i``'s slice; all other entries are structurally zero.
    """

    blocks: list
    offsets: np.ndarray
    n_samples: int

    @property
    def n_params(self):
        return int(self.offsets[-1])

    def dense(self):
        """Materialize the full ``(n, m, p)`` array."""
        n = len(self.blocks)
        J = np.zeros((n, self.n_samples, self.n_params))
        for i, blk in enumerate(self.blocks):
            J[i, :, self.offsets[i] : self.offsets[i + 1]] = blk.T
        return J

    def contract(self, G):
        """Return ``g_k = sum_ij G_ij dPsi_ij/dw_k`` for an ``(n, m)`` weight matrix."""
        g = np.zeros(self.n_params)
        for i, blk in enumerate(self.blocks):
            if blk.shape[0]:
                g[self.offsets[i] : self.offsets[i + 1]] = blk @ G[i]
        return g


@dataclass
class Dictionary:
    """Ordered collection of basis functions with a flat parameter layout."""

    basis: list
    var_names: tuple = None
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.basis = list(self.basis)
        if not self.basis:
            raise ContractError("a dictionary needs at least one basis function")
        sizes = [b.n_params for b in self.basis]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        if self.var_names is not None:
            self.var_names = tuple(self.var_names)

    def __len__(self):
        return len(self.basis)

    @property
    def n_params(self):
        return int(self.offsets[-1])

    def slice(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def initial_params(self):
        if self.n_params == 0:
            return np.zeros(0)
        return np.concatenate([b.params for b in self.basis])

    def trainable_mask(self):
        if self.n_params == 0:
            return np.zeros(0, dtype=bool)
        return np.concatenate([b.trainable for b in self.basis])

    def parameter_names(self):
        """``'b<i>.<k>'`` for parameter ``k`` of basis function ``i``, in ``w`` order."""
        return [f"b{i}.{k}" for i, b in enumerate(self.basis) for k in range(b.n_params)]

    def parameter_index(self, name):
        """Position in ``w`` of ``'b<i>.<k>'`` or ``'w[<j>]'``."""
        names = self.parameter_names()
        if name in names:
            return names.index(name)
        if name.startswith("w[") and name.endswith("]") and name[2:-1].isdigit():
            j = int(name[2:-1])
            if j < self.n_params:
                return j
        raise ContractError(f"no parameter named {name!r}; expected 'b<i>.<k>' or 'w[<j>]'")

    def min_dim(self):
        return max(b.min_dim() for b in self.basis)

    def _prepare(self, X, w):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2:
            raise ContractError(f"X must be (d, m), got shape {X.shape}")
        if X.shape[0] < self.min_dim():
            raise ContractError(f"X has {X.shape[0]} rows, dictionary needs {self.min_dim()}")
        w = self.initial_params() if w is None else np.asarray(w, dtype=np.float64).ravel()
        if w.size != self.n_params:
            raise ContractError(f"parameter vector has length {w.size}, expected {self.n_params}")
        if not np.all(np.isfinite(w)):
            raise ContractError("parameter vector contains NaN or Inf")
        return X, w

    @staticmethod
    def _check(arr, i, what):
        if not np.all(np.isfinite(arr)):
            raise NumericFailure(f"non-finite {what} in basis function {i}", index=i)
        return arr

    def _gaussian_dim(self):
        """Common state dimension if every function is a Gaussian, else ``None``."""
        if not all(type(b) is GaussianRBF for b in self.basis):
            return None
        dims = {b.dim for b in self.basis}
        return dims.pop() if len(dims) == 1 else None

    def _gaussian_batch(self, X, w, jac):
        # all-Gaussian fast path: memory layout of w is n blocks of [c, log s]
        n = len(self.basis)
        W = w.reshape(n, -1)
        C, s2 = W[:, :-1], np.exp(2.0 * W[:, -1])
        diff = X[None, : C.shape[1], :] - C[:, :, None]
        r2 = np.sum(diff * diff, axis=1)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            Psi = np.exp(-0.5 * r2 / s2[:, None])
            if not jac:
                return Psi, None
            base = Psi / s2[:, None]
            blocks = np.concatenate([base[:, None, :] * diff, (base * r2)[:, None, :]], axis=1)
        return Psi, blocks

    def _check_all(self, arr, what):
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(arr.reshape(arr.shape[0], -1)), axis=1))[0])
            raise NumericFailure(f"non-finite {what} in basis function {bad}", index=bad)
        return arr

    def evaluate(self, X, w=None):
        """Return ``Psi`` with ``Psi[i, j] = psi_i(x_j, w_i)``."""
        X, w = self._prepare(X, w)
        if self._gaussian_dim() is not None:
            return self._check_all(self._gaussian_batch(X, w, False)[0], "value")
        out = np.empty((len(self.basis), X.shape[1]))
        for i, b in enumerate(self.basis):
            out[i] = self._check(b.value(X, w[self.slice(i)]), i, "value")
        return out

    def param_jacobian(self, X, w=None):
        """Block-sparse derivative of ``Psi`` with respect to the flat parameters."""
        return self.evaluate_with_jacobian(X, w)[1]

    def evaluate_with_jacobian(self, X, w=None, skip_frozen=False):
        """``(Psi, BlockJacobian)`` computed in one pass.

        With ``skip_frozen`` the blocks of functions without trainable
        parameters are left at zero, which is all a masked gradient needs.
        """
        X, w = self._prepare(X, w)
        m = X.shape[1]
        if self._gaussian_dim() is not None:
            Psi, blocks = self._gaussian_batch(X, w, True)
            self._check_all(Psi, "value")
            self._check_all(blocks, "parameter derivative")
            return Psi, BlockJacobian(list(blocks), self.offsets.copy(), m)
        Psi = np.empty((len(self.basis), m))
        blocks = []
        for i, b in enumerate(self.basis):
            wi = w[self.slice(i)]
            Psi[i] = self._check(b.value(X, wi), i, "value")
            if skip_frozen and not b.trainable.any():
                blocks.append(np.zeros((b.n_params, m)))
                continue
            blk = np.atleast_2d(b.param_jac(X, wi)).reshape(b.n_params, m)
            blocks.append(self._check(blk, i, "parameter derivative"))
        return Psi, BlockJacobian(blocks, self.offsets.copy(), m)

    def state_jacobian(self, X, w=None):
        """Return the ``(n, m, d)`` derivative of ``Psi`` with respect to the state."""
        X, w = self._prepare(X, w)
        out = np.empty((len(self.basis), X.shape[1], X.shape[0]))
        for i, b in enumerate(self.basis):
            out[i] = self._check(b.state_jac(X, w[self.slice(i)]), i, "state derivative").T
        return out

    def labels(self, w=None):
        w = self.initial_params() if w is None else np.asarray(w, dtype=np.float64)
        return [b.label(w[self.slice(i)], self.var_names) for i, b in enumerate(self.basis)]

    def with_params(self, w):
        """New dictionary whose stored initial parameters are ``w``."""
        w = np.asarray(w, dtype=np.float64)
        return Dictionary([b.with_params(w[self.slice(i)]) for i, b in enumerate(self.basis)],
                          self.var_names)

    def subset(self, rows):
        return Dictionary([self.basis[i] for i in rows], self.var_names)

    def params_of(self, i, w):
        return np.asarray(w)[self.slice(i)]


def evaluate(dictionary, X, w=None):
    return dictionary.evaluate(X, w)


def param_jacobian(dictionary, X, w=None):
    return dictionary.param_jacobian(X, w)


def state_jacobian(dictionary, X, w=None):
    return dictionary.state_jacobian(X, w)


def gaussian_dictionary(centers, bandwidths, trainable=True):
    """Dictionary of isotropic Gaussians; ``centers`` is ``(n, d)`` or ``(n,)``."""
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    bw = np.broadcast_to(np.asarray(bandwidths, dtype=np.float64), (centers.shape[0],))
    return Dictionary([GaussianRBF(c, s, trainable) for c, s in zip(centers, bw)])
