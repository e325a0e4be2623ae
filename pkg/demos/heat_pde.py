"""Parametric PDE-FIND on the nonlinear heat equation.

The conductivity exp(chi u) enters the library through the unknown
exponent chi, which is learned jointly with the term coefficients.
"""

from dictopt import presets
from dictopt.optimizers import OptimizerConfig
from dictopt.sysid import HEAT_TERMS, fit_parametric_pdefind

field = presets.generate("heat")
print(f"field: {field.n_t} snapshots x {field.n_x} grid points")
cfg = OptimizerConfig(max_iters=2000, step_size=3e-4, step_size_w=1e-2)
model, history = fit_parametric_pdefind(field, HEAT_TERMS, w0={"chi": presets.HEAT_CHI0}, config=cfg,
                                        threshold=0.05)
print(f"chi: {presets.HEAT_CHI0} -> {model.params['chi']:.4f} (simulated with -1)")
print(model.equations(4))
