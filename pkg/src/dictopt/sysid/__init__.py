"""System identification: parametric SINDy and parametric PDE-FIND."""

from .equations import format_pde, format_sindy, parse_equations, parse_pde, parse_sindy
from .pde import (
    HEAT_TERMS,
    PdeLibrary,
    PdeModel,
    PdeOracle,
    build_pde_library,
    finite_diff_space,
    finite_diff_time,
    fit_parametric_pdefind,
    fit_pdefind,
    grad_xi,
    parse_term,
    pde_error,
    pde_grad_w,
    pde_loss,
    pdefind_solve,
    per_sample_pde_loss,
    threshold_pde,
)
from .sindy import (
    SindyModel,
    SindyOracle,
    fit_parametric_sindy,
    fit_sindy,
    grad_Xi,
    landscape_scan,
    per_sample_sindy_loss,
    sindy_error,
    sindy_grad_psi,
    sindy_grad_w,
    sindy_loss,
    sindy_solve,
    threshold_sindy,
)
from .sparsify import condition_number, stlsq


def threshold_sparsify(model, data, threshold=0.05):
    """Hard-threshold-and-refit for either model type.

    ``data`` is the training set: a derivative :class:`~dictopt.data.TrajectoryData`
    for a :class:`SindyModel`, a :class:`~dictopt.data.GridField` for a
    :class:`PdeModel`.
    """
    if isinstance(model, SindyModel):
        return threshold_sindy(model, data, threshold)
    if isinstance(model, PdeModel):
        return threshold_pde(model, data, threshold)
    raise TypeError(f"cannot sparsify {type(model).__name__}")
