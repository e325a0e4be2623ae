"""Model files (JSON) and datasets (CSV).

Model documents carry ``schema_version``, ``kind`` (koopman, sindy or pde),
the dictionary spec or PDE term list, the parameter vector, the
coefficients and a provenance mapping.  Floats are written with Python's
shortest round-trip ``repr`` so every value reloads bit-identically.

Dataset files start with ``#``-prefixed ``key: value`` metadata lines,
then one header row of column names and one row per sample (trajectory
data) or per time slice (grid data).
"""

import json
import math

import numpy as np

from .data import GridField, TrajectoryData
from .dictionary import (
    BasisFunction,
    Constant,
    Coordinate,
    CosineFreq,
    Dictionary,
    ExpRate,
    GaussianRBF,
    Monomial,
    Product,
    SineFreq,
)
from .errors import (
    ContractError,
    EmptyDatasetError,
    LoadError,
    MalformedFileError,
    NonFiniteValueError,
    SchemaVersionError,
    UnknownFamilyError,
)
from .koopman import KoopmanModel
from .sysid.pde import PdeModel
from .sysid.sindy import SindyModel

__all__ = [
    "SCHEMA_VERSION",
    "dictionary_to_spec",
    "dictionary_from_spec",
    "model_to_document",
    "model_from_document",
    "save_model",
    "load_model",
    "write_dataset",
    "read_dataset",
    "to_jsonable",
]

SCHEMA_VERSION = 1

_FAMILIES = {
    cls.tag: cls
    for cls in (Constant, Coordinate, Monomial, GaussianRBF, SineFreq, CosineFreq, ExpRate, Product)
}


def _floats(values, what):
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"non-finite value in {what}")
    return arr


def _basis_from_spec(spec):
    if not isinstance(spec, dict) or "family" not in spec:
        raise MalformedFileError("basis entry must be an object with a 'family' key")
    tag = spec["family"]
    if tag not in _FAMILIES:
        raise UnknownFamilyError(tag)
    cls = _FAMILIES[tag]
    try:
        if cls is Product:
            basis = Product([_basis_from_spec(f) for f in spec["factors"]], trainable=spec.get("trainable"))
            return basis
        basis = BasisFunction.__new__(cls)
        if "index" in spec:
            basis.index = int(spec["index"])
        BasisFunction.__init__(basis, _floats(spec.get("params", []), f"{tag} parameters"),
                               spec.get("trainable"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, LoadError):
            raise
        raise MalformedFileError(f"invalid {tag} entry: {exc}") from exc
    return basis


def dictionary_to_spec(dictionary):
    return {
        "var_names": list(dictionary.var_names) if dictionary.var_names else None,
        "basis": [b.to_spec() for b in dictionary.basis],
    }


def dictionary_from_spec(spec):
    if not isinstance(spec, dict) or not isinstance(spec.get("basis"), list):
        raise MalformedFileError("dictionary spec must contain a 'basis' list")
    return Dictionary([_basis_from_spec(b) for b in spec["basis"]], spec.get("var_names"))


def to_jsonable(obj):
    """Nested dicts/lists of plain Python values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def model_to_document(model):
    doc = {"schema_version": SCHEMA_VERSION}
    if isinstance(model, KoopmanModel):
        doc.update(kind="koopman", dictionary=dictionary_to_spec(model.dictionary),
                   w=model.w.tolist(), K=model.K.tolist(), lag_time=model.lag_time)
    elif isinstance(model, SindyModel):
        doc.update(kind="sindy", dictionary=dictionary_to_spec(model.dictionary),
                   w=model.w.tolist(), Xi=model.Xi.tolist(), var_names=list(model.var_names))
    elif isinstance(model, PdeModel):
        doc.update(kind="pde", terms=list(model.terms), param_names=list(model.param_names),
                   w=model.w.tolist(), xi=model.xi.tolist())
    else:
        raise ContractError(f"cannot serialize {type(model).__name__}")
    doc["provenance"] = to_jsonable(model.provenance)
    return doc


def _matrix(doc, key):
    if key not in doc:
        raise MalformedFileError(f"missing field {key!r}")
    try:
        arr = _floats(doc[key], key)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, LoadError):
            raise
        raise MalformedFileError(f"field {key!r} is not numeric") from exc
    return arr


def model_from_document(doc):
    if not isinstance(doc, dict):
        raise MalformedFileError("model document must be a JSON object")
    if "schema_version" not in doc:
        raise SchemaVersionError("missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"schema version {doc['schema_version']!r} is not supported (expected {SCHEMA_VERSION})"
        )
    kind = doc.get("kind")
    prov = doc.get("provenance") or {}
    try:
        if kind == "koopman":
            return KoopmanModel(dictionary_from_spec(doc.get("dictionary")), _matrix(doc, "w"),
                                _matrix(doc, "K"), doc.get("lag_time"), prov)
        if kind == "sindy":
            return SindyModel(dictionary_from_spec(doc.get("dictionary")), _matrix(doc, "w"),
                              _matrix(doc, "Xi"), doc.get("var_names"), prov)
        if kind == "pde":
            return PdeModel(doc["terms"], _matrix(doc, "xi"), _matrix(doc, "w"),
                            doc["param_names"], prov)
    except ContractError as exc:
        raise MalformedFileError(f"inconsistent {kind} model: {exc}") from exc
    except KeyError as exc:
        raise MalformedFileError(f"missing field {exc}") from exc
    raise MalformedFileError(f"unknown model kind {kind!r}")


def _reject_constant(name):
    raise NonFiniteValueError(f"non-finite number {name} in model file")


def save_model(model, path):
    doc = model_to_document(model)
    text = json.dumps(doc, indent=2, allow_nan=False)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return model_from_document(doc)


# datasets


def _header(data):
    if isinstance(data, GridField):
        meta = {"kind": "grid", "dx": data.dx, "dt": data.dt, "x0": data.x0, "t0": data.t0}
        names = [f"u{j}" for j in range(data.n_x)]
        return meta, names, data.U
    if isinstance(data, TrajectoryData):
        d = data.dim
        meta = {"kind": data.kind, "dim": d, "tau": data.tau}
        second = data.Y if data.Y is not None else data.Xdot
        prefix = "y" if data.Y is not None else "dx"
        names = [f"x{k + 1}" for k in range(d)] + [f"{prefix}{k + 1}" for k in range(d)]
        return meta, names, np.vstack([data.X, second]).T
    raise ContractError(f"cannot write {type(data).__name__} as a dataset")


def write_dataset(data, path):
    """Write trajectory pairs or a grid field as CSV with a metadata header."""
    meta, names, rows = _header(data)
    meta["schema_version"] = SCHEMA_VERSION
    meta["meta"] = to_jsonable(data.meta)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {json.dumps(meta[key], allow_nan=False)}\n")
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_dataset(path):
    """Read a dataset written by :func:`write_dataset`."""
    meta, names, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition(":")
                if not sep:
                    raise MalformedFileError("metadata line must be '# key: value'", line=lineno)
                try:
                    meta[key.strip()] = json.loads(value)
                except json.JSONDecodeError as exc:
                    raise MalformedFileError(f"bad metadata value for {key.strip()!r}", line=lineno) from exc
                continue
            if names is None:
                names = line.split(",")
                continue
            fields = line.split(",")
            if len(fields) != len(names):
                raise MalformedFileError(
                    f"expected {len(names)} columns, found {len(fields)}", line=lineno
                )
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise MalformedFileError(f"non-numeric entry: {exc}", line=lineno) from exc
            if not all(math.isfinite(v) for v in values):
                raise NonFiniteValueError(f"non-finite entry in data row {len(rows)}", row=len(rows))
            rows.append(values)
    if not rows:
        raise EmptyDatasetError(f"{path} contains no samples")
    if "schema_version" not in meta:
        raise SchemaVersionError(f"{path} has no '# schema_version' line")
    if meta["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionError(f"dataset schema version {meta['schema_version']!r} is not supported")
    arr = np.array(rows, dtype=np.float64)
    kind = meta.get("kind")
    extra = meta.get("meta") or {}
    if kind == "grid":
        return GridField(arr, meta["dx"], meta["dt"], meta.get("x0", 0.0), meta.get("t0", 0.0), extra)
    if kind in ("lagged", "derivative"):
        d = int(meta.get("dim", arr.shape[1] // 2))
        if arr.shape[1] != 2 * d:
            raise MalformedFileError(f"expected {2 * d} columns for a {d}-dimensional dataset")
        X, other = arr[:, :d].T, arr[:, d:].T
        if kind == "lagged":
            return TrajectoryData(X, Y=other, tau=meta.get("tau"), meta=extra)
        return TrajectoryData(X, Xdot=other, meta=extra)
    raise MalformedFileError(f"unknown dataset kind {kind!r}")
