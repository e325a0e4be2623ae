"""Metastable sets of a two-dimensional triple-well potential.

Gaussians placed on the right half of the domain only are trained by
VAMP-2 ascent; the sign of the second eigenfunction then separates the
two deep wells at (-1, 0) and (1, 0).
"""

import numpy as np

from dictopt import koopman as km
from dictopt import presets
from dictopt.optimizers import OptimizerConfig

data = presets.generate("triple-well")
dic = presets.triple_well_dictionary()
ridge = km.default_ridge(dic.evaluate(data.X), 0.01)
model, _ = km.fit_parametric_edmd(data, dic, config=OptimizerConfig(max_iters=300), ridge=ridge, refit=True)
spec = model.spectrum()
print("leading eigenvalues:", np.round(spec.eigenvalues[:4].real, 4))

wells = np.array([[-1.0, 1.0], [0.0, 0.0]])
phi2 = spec.eigenfunctions(wells, which=1, parts=True)[0][0]
print(f"phi_2 at (-1, 0): {phi2[0]:+.3f}   at (1, 0): {phi2[1]:+.3f}")
