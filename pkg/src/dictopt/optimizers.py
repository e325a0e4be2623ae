"""First-order optimizers and the two-block alternating Adam loop.

The single-step functions work on numpy arrays of any shape.  Gradients are
supplied as callables ``grad(x) -> array``; SGD additionally needs an oracle
exposing ``batch_gradient(x, idx)`` and ``n_samples``.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ContractError, DivergedError, NumericFailure

__all__ = [
    "OptimizerConfig",
    "AdamState",
    "NesterovState",
    "GradientOracle",
    "HistoryRecord",
    "gd_step",
    "sgd_step",
    "draw_batch",
    "nesterov_step",
    "adam_step",
    "alternating_adam",
    "default_step_size",
    "run_single_block",
]

FULL = "full"
DIVERGENCE_LIMIT = 1e12
PLATEAU_WINDOW = 50
PLATEAU_RTOL = 1e-12


@dataclass
class OptimizerConfig:
    """Hyperparameters shared by all optimizers.

    ``step_size_w`` overrides ``step_size`` for the parameter block of
    :func:`alternating_adam`; ``clip_norm`` (off by default) rescales a block
    gradient whose 2-norm exceeds it.
    """

    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: object = FULL
    max_iters: int = 1000
    seed: int = 0
    tolerance: float = 0.0
    step_size_w: float = None
    clip_norm: float = None

    def __post_init__(self):
        if not self.step_size > 0:
            raise ContractError(f"step_size must be positive, got {self.step_size}")
        if self.step_size_w is not None and not self.step_size_w > 0:
            raise ContractError(f"step_size_w must be positive, got {self.step_size_w}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ContractError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ContractError("epsilon must be positive")
        if self.batch_size != FULL and int(self.batch_size) < 1:
            raise ContractError("batch_size must be positive or 'full'")
        if self.max_iters < 0 or self.tolerance < 0:
            raise ContractError("max_iters and tolerance must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, x):
        x = np.asarray(x, dtype=np.float64)
        return cls(np.zeros_like(x), np.zeros_like(x), 0)


@dataclass
class NesterovState:
    """Momentum sequence value ``p`` and the previous iterate (``None`` before the first step)."""

    p: float = 0.0
    x_prev: np.ndarray = None


class GradientOracle:
    """Gradient of a loss ``Q(x) = sum_i Q_i(x)`` over ``n_samples`` terms.

    Subclasses implement :meth:`batch_gradient`.  ``full_gradient`` is the
    batch gradient over every sample, so a full batch reproduces it exactly.
    """

    n_samples = 0

    def batch_gradient(self, x, idx):
        raise NotImplementedError

    def full_gradient(self, x):
        return self.batch_gradient(x, None)

    def __call__(self, x):
        return self.full_gradient(x)


def _finite(g, what="gradient"):
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise NumericFailure(f"non-finite {what}")
    return g


def _grad(oracle, x):
    return _finite(oracle(x))


def gd_step(x, oracle, h):
    """One gradient-descent step ``x - h * grad(x)``."""
    if not h > 0:
        raise ContractError(f"step size must be positive, got {h}")
    return x - h * _grad(oracle, x)


def draw_batch(rng, n_samples, batch_size):
    """Sorted index set drawn uniformly without replacement, or ``None`` for the full set."""
    if batch_size == FULL:
        return None
    b = int(batch_size)
    if b < 1:
        raise ContractError("empty batch")
    if b > n_samples:
        raise ContractError(f"batch size {b} exceeds the {n_samples} samples")
    idx = np.sort(rng.choice(n_samples, size=b, replace=False))
    return None if b == n_samples else idx


def sgd_step(x, oracle, h, batch_size, rng):
    """Mini-batch SGD step on the summed loss over a random batch."""
    if not h > 0:
        raise ContractError(f"step size must be positive, got {h}")
    idx = draw_batch(rng, oracle.n_samples, batch_size)
    return x - h * _finite(oracle.batch_gradient(x, idx))


def nesterov_step(state, x, oracle, h):
    """One accelerated step; returns ``(new_state, x_next)``.

    ``p_{t+1} = (1 + sqrt(1 + 4 p_t^2)) / 2`` and ``beta_t = (p_t - 1) / p_{t+1}``,
    with the gradient taken at the look-ahead point.  On the first step the
    previous iterate is taken equal to ``x``, which removes the momentum term.
    """
    if not h > 0:
        raise ContractError(f"step size must be positive, got {h}")
    x = np.asarray(x, dtype=np.float64)
    x_prev = x if state.x_prev is None else state.x_prev
    p_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * state.p**2))
    beta = (state.p - 1.0) / p_next
    look = x + beta * (x - x_prev)
    x_next = look - h * _grad(oracle, look)
    return NesterovState(p_next, x.copy()), x_next


def adam_step(state, x, grad, h, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update given the gradient array at ``x``; returns ``(new_state, x_next)``."""
    g = _finite(grad)
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    t = state.t + 1
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    x_next = x - h * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m, v, t), x_next


def default_step_size(Psi_x):
    """``1 / lambda_max(Psi_x Psi_x^T)``, i.e. one over the squared top singular value."""
    P = np.asarray(Psi_x, dtype=np.float64)
    if P.size == 0:
        raise ContractError("Psi_x must be nonempty")
    s = np.linalg.svd(np.atleast_2d(P), compute_uv=False)
    if s[0] == 0.0:
        raise ContractError("Psi_x is the zero matrix")
    return 1.0 / s[0] ** 2


@dataclass
class HistoryRecord:
    iteration: int
    loss_1: float
    loss_2: float
    grad_norm_A: float
    grad_norm_w: float

    def as_row(self):
        return [self.iteration, self.loss_1, self.loss_2, self.grad_norm_A, self.grad_norm_w]


HISTORY_COLUMNS = ("iteration", "loss_1", "loss_2", "grad_norm_A", "grad_norm_w")


def _clip(g, limit):
    if limit is None:
        return g
    norm = np.linalg.norm(g)
    return g * (limit / norm) if norm > limit else g


def _plateaued(values, window=PLATEAU_WINDOW, rtol=PLATEAU_RTOL):
    if len(values) <= window:
        return False
    old, new = values[-window - 1], values[-1]
    return abs(new - old) <= rtol * max(abs(old), np.finfo(float).tiny)


def alternating_adam(A0, w0, grad_A, grad_w, config=None, loss_1=None, loss_2=None,
                     stop_on_plateau=True, callback=None):
    """Two-block Adam: per iteration update ``w`` then ``A``.

    ``grad_w(A_t, w_t)`` drives the parameter block and ``grad_A(A_t, w_{t+1})``
    the coefficient block, so the coefficient update always sees the
    freshly updated parameters.  ``loss_1(A, w)`` and ``loss_2(A, w)`` are
    recorded after every iteration when given.

    Stops after ``config.max_iters`` iterations, when the combined update
    norm drops below ``config.tolerance``, or (``stop_on_plateau``) when both
    recorded losses change by less than 1e-12 relative over 50 iterations.

    Returns ``(A, w, history)`` where ``history`` is a list of
    :class:`HistoryRecord`; record 0 describes the starting point.

    Raises
    ------
    DivergedError
        If a recorded loss becomes non-finite or exceeds 1e12 in magnitude.
    """
    cfg = config or OptimizerConfig()
    A = np.array(A0, dtype=np.float64, copy=True)
    w = np.array(w0, dtype=np.float64, copy=True)
    hA = cfg.step_size
    hw = cfg.step_size_w if cfg.step_size_w is not None else cfg.step_size
    sA, sw = AdamState.zeros_like(A), AdamState.zeros_like(w)
    history = []

    def record(it, gA_norm, gw_norm):
        l1 = float(loss_1(A, w)) if loss_1 is not None else float("nan")
        l2 = float(loss_2(A, w)) if loss_2 is not None else float("nan")
        rec = HistoryRecord(it, l1, l2, gA_norm, gw_norm)
        history.append(rec)
        for fn, val in ((loss_1, l1), (loss_2, l2)):
            if fn is not None and (not np.isfinite(val) or abs(val) > DIVERGENCE_LIMIT):
                raise DivergedError(f"loss {val} at iteration {it}", it, history)
        return rec

    record(0, float("nan"), float("nan"))
    for it in range(1, cfg.max_iters + 1):
        try:
            gw = _clip(_finite(grad_w(A, w), "parameter gradient"), cfg.clip_norm) if w.size else w
            sw, w_next = adam_step(sw, w, gw, hw, cfg.beta1, cfg.beta2, cfg.epsilon) if w.size else (sw, w)
            gA = _clip(_finite(grad_A(A, w_next), "coefficient gradient"), cfg.clip_norm)
            sA, A_next = adam_step(sA, A, gA, hA, cfg.beta1, cfg.beta2, cfg.epsilon)
        except NumericFailure as exc:
            raise DivergedError(f"numeric failure at iteration {it}: {exc}", it, history) from exc
        step_norm = np.sqrt(np.sum((A_next - A) ** 2) + np.sum((w_next - w) ** 2))
        A, w = A_next, w_next
        record(it, float(np.linalg.norm(gA)), float(np.linalg.norm(gw)) if w.size else 0.0)
        if callback is not None:
            callback(it, A, w)
        if step_norm < cfg.tolerance:
            break
        if stop_on_plateau and (loss_1 is not None or loss_2 is not None):
            if _plateaued([r.loss_1 for r in history]) and _plateaued([r.loss_2 for r in history]):
                break
    return A, w, history


def run_single_block(x0, oracle, method, h, iters, config=None, callback=None):
    """Run ``iters`` steps of ``method`` in {'gd', 'sgd', 'nesterov', 'adam'} on one block.

    ``callback(t, x)`` is invoked after every step; returning ``True`` stops the run.
    Returns the final iterate and the number of steps taken.
    """
    cfg = config or OptimizerConfig(step_size=h)
    x = np.array(x0, dtype=np.float64, copy=True)
    rng = np.random.default_rng(cfg.seed)
    nest = NesterovState()
    adam = AdamState.zeros_like(x)
    for t in range(1, iters + 1):
        if method == "gd":
            x = gd_step(x, oracle, h)
        elif method == "sgd":
            x = sgd_step(x, oracle, h, cfg.batch_size, rng)
        elif method == "nesterov":
            nest, x = nesterov_step(nest, x, oracle, h)
        elif method == "adam":
            adam, x = adam_step(adam, x, _grad(oracle, x), h, cfg.beta1, cfg.beta2, cfg.epsilon)
        else:
            raise ContractError(f"unknown method {method!r}")
        if callback is not None and callback(t, x):
            return x, t
    return x, iters
