"""Experiment configuration and the fit/scan workflow behind the CLI.

A configuration is a JSON object with the keys of :class:`ExperimentConfig`.
Values are resolved in three layers: preset defaults for the chosen
system, then the config file, then command-line flags.
"""

import copy
import csv
import json
import logging
import os
from dataclasses import dataclass, field, fields

import numpy as np

from . import io as mio
from . import koopman as km
from . import presets
from .data import GridField, TrajectoryData
from .errors import ConfigurationError, ContractError
from .optimizers import HISTORY_COLUMNS, OptimizerConfig
from .sysid.pde import (
    HEAT_TERMS,
    _LibraryBuilder,
    fit_parametric_pdefind,
    finite_diff_time,
    pde_loss,
    pdefind_solve,
)
from .sysid.sindy import fit_parametric_sindy, landscape_scan

__all__ = [
    "ExperimentConfig",
    "FIT_KINDS",
    "load_config",
    "load_data",
    "resolve_dictionary",
    "run_fit",
    "run_scan",
    "write_history",
    "write_scan",
    "write_spectrum",
]

log = logging.getLogger("dictopt")

FIT_KINDS = ("edmd", "sindy", "pdefind")
_KIND_FOR_DATA = {"lagged": "edmd", "derivative": "sindy", "grid": "pdefind"}


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    ``system`` is a preset name or ``'file:<path>'``.  ``dictionary`` is a
    model-file dictionary spec (``{"basis": [...]}``) or, for PDE fits,
    ``{"terms": [...]}``; ``None`` selects the preset.  ``optimizer`` holds
    :class:`~dictopt.optimizers.OptimizerConfig` fields.  ``scan`` holds
    ``param``, ``range`` and ``resolution`` (number of grid values).
    """

    system: str = "ou"
    params: dict = field(default_factory=dict)
    dictionary: dict = None
    w0: object = None
    fit: str = None
    optimizer: dict = field(default_factory=dict)
    ridge_scale: float = None
    refit: bool = None
    threshold: float = None
    grid: dict = None
    scan: dict = None
    out: str = "out"
    seed: int = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigurationError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigurationError(f"unknown configuration key(s): {', '.join(unknown)}")
        return cls(**copy.deepcopy(raw))

    def updated(self, **changes):
        raw = {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}
        for key, value in changes.items():
            if value is not None:
                raw[key] = value
        return ExperimentConfig(**raw)

    @property
    def preset(self):
        return None if self.system.startswith("file:") else self.system

    def validate(self):
        if not isinstance(self.system, str):
            raise ConfigurationError("system must be a string")
        if self.preset is not None:
            presets.system_params(self.system, self.params)
        elif self.params:
            raise ConfigurationError("system parameters only apply to simulated systems")
        if self.fit is not None and self.fit not in FIT_KINDS:
            raise ConfigurationError(f"fit must be one of {', '.join(FIT_KINDS)}, got {self.fit!r}")
        if not isinstance(self.optimizer, dict):
            raise ConfigurationError("optimizer must be an object")
        try:
            OptimizerConfig(**self.optimizer)
        except TypeError as exc:
            raise ConfigurationError(f"bad optimizer settings: {exc}") from exc
        except ContractError as exc:
            raise ConfigurationError(str(exc)) from exc
        if self.threshold is not None and not 0 <= self.threshold < 1:
            raise ConfigurationError("threshold must lie in [0, 1)")
        if self.ridge_scale is not None and not self.ridge_scale >= 0:
            raise ConfigurationError("ridge_scale must be nonnegative")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigurationError("seed must be a nonnegative integer")
        if self.scan is not None:
            _scan_grid(self.scan)
        if self.grid is not None:
            unknown = set(self.grid) - {"lo", "hi", "points"}
            if unknown:
                raise ConfigurationError(f"unknown grid key(s): {', '.join(sorted(unknown))}")


def load_config(path):
    """Read a JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} line {exc.lineno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(raw)


def load_data(cfg):
    """Simulate the preset system or read the dataset named by ``file:<path>``."""
    if cfg.preset is None:
        return mio.read_dataset(cfg.system[len("file:"):])
    return presets.generate(cfg.system, cfg.params, cfg.seed)


def _data_kind(data):
    return "grid" if isinstance(data, GridField) else data.kind


def _source_system(cfg, data):
    if cfg.preset is not None:
        return cfg.preset
    system = (data.meta or {}).get("system")
    return system if system in presets.SYSTEMS else None


def resolve_dictionary(cfg, data):
    """Dictionary (or ``(terms, w0)`` for PDE fits) from the config or the preset."""
    kind = cfg.fit or _KIND_FOR_DATA[_data_kind(data)]
    system = _source_system(cfg, data)
    if kind == "pdefind":
        if cfg.dictionary is not None:
            terms = cfg.dictionary.get("terms")
            if not isinstance(terms, list):
                raise ConfigurationError("a PDE dictionary needs a 'terms' list")
        else:
            terms = list(HEAT_TERMS)
        w0 = cfg.w0 if cfg.w0 is not None else ({"chi": presets.HEAT_CHI0} if system == "heat" else None)
        return kind, (terms, w0)
    if cfg.dictionary is not None:
        dic = mio.dictionary_from_spec(cfg.dictionary)
    elif system is not None and system != "heat":
        dic = presets.default_dictionary(system)
    else:
        raise ConfigurationError("no dictionary given and no preset applies to this dataset")
    if cfg.w0 is not None:
        w0 = np.asarray(cfg.w0, dtype=np.float64)
        if w0.shape != (dic.n_params,):
            raise ConfigurationError(f"w0 needs {dic.n_params} entries, got {w0.size}")
        dic = dic.with_params(w0)
    return kind, dic


def _check_kind(kind, data):
    need = {"edmd": "lagged", "sindy": "derivative", "pdefind": "grid"}[kind]
    if _data_kind(data) != need:
        raise ConfigurationError(f"{kind} fits need {need} data, got {_data_kind(data)} data")


def _fit_options(cfg, data):
    system = _source_system(cfg, data)
    base = copy.deepcopy(presets.FIT_DEFAULTS.get(system, {})) if system else {}
    opt = dict(base.get("optimizer", {}))
    opt.update(cfg.optimizer)
    if cfg.seed is not None:
        opt.setdefault("seed", cfg.seed)
    return dict(
        optimizer=OptimizerConfig(**opt),
        ridge_scale=cfg.ridge_scale if cfg.ridge_scale is not None else base.get("ridge_scale", km.RIDGE_SCALE),
        refit=cfg.refit if cfg.refit is not None else base.get("refit", False),
        threshold=cfg.threshold if cfg.threshold is not None else base.get("threshold"),
    )


def run_fit(cfg, data=None):
    """Fit the configured model; returns ``(kind, model, history)``.

    Raises :class:`~dictopt.errors.DivergedError` (with the partial history)
    when the optimizer diverges.
    """
    data = load_data(cfg) if data is None else data
    kind, dic = resolve_dictionary(cfg, data)
    _check_kind(kind, data)
    opts = _fit_options(cfg, data)
    log.info("fitting %s model, %s", kind, opts["optimizer"])
    if kind == "edmd":
        ridge = km.default_ridge(dic.evaluate(data.X), opts["ridge_scale"])
        model, history = km.fit_parametric_edmd(data, dic, config=opts["optimizer"], ridge=ridge,
                                                refit=opts["refit"])
    elif kind == "sindy":
        model, history = fit_parametric_sindy(data, dic, config=opts["optimizer"],
                                              threshold=opts["threshold"])
    else:
        terms, w0 = dic
        model, history = fit_parametric_pdefind(data, terms, w0=w0, config=opts["optimizer"],
                                                threshold=opts["threshold"])
    return kind, model, history


def _scan_grid(scan):
    if not isinstance(scan, dict):
        raise ConfigurationError("scan must be an object with param, range and resolution")
    unknown = set(scan) - {"param", "range", "resolution"}
    if unknown:
        raise ConfigurationError(f"unknown scan key(s): {', '.join(sorted(unknown))}")
    try:
        lo, hi = (float(v) for v in scan["range"])
        n = int(scan.get("resolution", 100))
        name = str(scan["param"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad scan settings: {exc}") from exc
    if n < 1 or not hi >= lo:
        raise ConfigurationError("scan needs resolution >= 1 and range lo <= hi")
    return name, np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def run_scan(cfg, data=None):
    """Loss at the closed-form coefficients over a 1-D parameter grid; ``(k, 2)`` array."""
    if cfg.scan is None:
        raise ConfigurationError("scan settings are missing")
    name, values = _scan_grid(cfg.scan)
    data = load_data(cfg) if data is None else data
    kind, dic = resolve_dictionary(cfg, data)
    _check_kind(kind, data)
    if kind == "pdefind":
        terms, w0 = dic
        ut = finite_diff_time(data).ravel()
        builder = _LibraryBuilder(data, terms)
        if name not in builder.param_names:
            raise ConfigurationError(f"no PDE parameter named {name!r}; have {builder.param_names}")
        w = builder.coerce(w0).copy()
        k = builder.param_names.index(name)
        out = np.empty((values.size, 2))
        for i, v in enumerate(values):
            w[k] = v
            theta = builder.build(w).theta
            out[i] = v, pde_loss(pdefind_solve(theta, ut), theta, ut)
        return out
    try:
        idx = dic.parameter_index(name)
    except ContractError as exc:
        raise ConfigurationError(str(exc)) from exc
    if not dic.trainable_mask()[idx]:
        raise ConfigurationError(f"parameter {name!r} is not trainable")
    if kind == "sindy":
        return landscape_scan(data, dic, idx, values)
    w = dic.initial_params()
    out = np.empty((values.size, 2))
    for k, v in enumerate(values):
        w[idx] = v
        Px, Py = dic.evaluate(data.X, w), dic.evaluate(data.Y, w)
        out[k] = v, km.reconstruction_loss(km.edmd_solve(Px, Py), Px, Py)
    return out


# output files


def write_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for rec in history:
            writer.writerow([rec.iteration] + [repr(float(v)) for v in rec.as_row()[1:]])


def _grid_points(model, data, grid):
    d = model.dictionary.min_dim()
    if data is not None and isinstance(data, TrajectoryData):
        d = data.dim
    grid = grid or {}
    if "lo" in grid and "hi" in grid:
        lo, hi = np.atleast_1d(grid["lo"]).astype(float), np.atleast_1d(grid["hi"]).astype(float)
    elif data is not None:
        lo, hi = data.X.min(axis=1), data.X.max(axis=1)
    else:
        raise ConfigurationError("spectrum of a saved model needs grid lo and hi")
    if lo.size != d or hi.size != d:
        raise ConfigurationError(f"grid bounds need {d} entries")
    n = int(grid.get("points", 200 if d == 1 else 50))
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh])


def write_spectrum(model, out_dir, data=None, grid=None, n_modes=5):
    """Write ``eigenvalues.csv`` and ``eigenfunctions.csv``; returns the spectrum."""
    spec = model.spectrum()
    lam = spec.eigenvalues
    with open(os.path.join(out_dir, "eigenvalues.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "real", "imag", "modulus"])
        for i, v in enumerate(lam):
            writer.writerow([i + 1, repr(float(v.real)), repr(float(v.imag)), repr(float(abs(v)))])
    X = _grid_points(model, data, grid)
    k = min(n_modes, len(lam))
    re, im = spec.eigenfunctions(X, which=list(range(k)), parts=True)
    header = [f"x{j + 1}" for j in range(X.shape[0])]
    header += [f"phi{i + 1}_{part}" for i in range(k) for part in ("re", "im")]
    with open(os.path.join(out_dir, "eigenfunctions.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for col in range(X.shape[1]):
            row = [repr(float(v)) for v in X[:, col]]
            for i in range(k):
                row += [repr(float(re[i, col])), repr(float(im[i, col]))]
            writer.writerow(row)
    return spec


def write_scan(table, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "loss"])
        for v, loss in table:
            writer.writerow([repr(float(v)), repr(float(loss))])
