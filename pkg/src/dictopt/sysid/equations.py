"""Canonical text form of discovered equations.

One line per state variable, terms in library order, zero coefficients
omitted, coefficients in scientific notation with an unpadded exponent::

    dx3/dt = -1.4286000000000000e1 * x2

PDE models print ``u_t = ...`` followed by one ``name = value`` line per
parameter.  With the default 16 fractional digits every float64
coefficient survives a print/parse round trip exactly.
"""

import numpy as np

from ..errors import ContractError

__all__ = [
    "format_coefficient",
    "format_rhs",
    "format_sindy",
    "format_pde",
    "parse_equations",
    "parse_sindy",
    "parse_pde",
]


def format_coefficient(value, precision=16):
    mant, exp = format(float(value), f".{precision}e").split("e")
    return f"{mant}e{int(exp)}"


def format_rhs(coefs, labels, precision=16):
    parts = []
    for c, label in zip(coefs, labels):
        if c == 0.0:
            continue
        body = f"{format_coefficient(abs(c), precision)} * {label}"
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts) if parts else "0"


def format_sindy(model, precision=16):
    labels = model.labels
    lines = [
        f"d{name}/dt = {format_rhs(model.Xi[:, k], labels, precision)}"
        for k, name in enumerate(model.var_names)
    ]
    return "\n".join(lines)


def format_pde(model, precision=16):
    lines = [f"u_t = {format_rhs(model.xi, model.terms, precision)}"]
    for name, value in zip(model.param_names, model.w):
        lines.append(f"{name} = {format_coefficient(value, precision)}")
    return "\n".join(lines)


def _split_terms(rhs):
    # break at ' + ' and ' - ' outside parentheses
    terms, depth, start, k = [], 0, 0, 0
    sign = 1.0
    if rhs.startswith("-"):
        sign, start, k = -1.0, 1, 1
    while k < len(rhs):
        ch = rhs[k]
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif depth == 0 and rhs[k : k + 3] in (" + ", " - "):
            terms.append((sign, rhs[start:k]))
            sign = 1.0 if rhs[k + 1] == "+" else -1.0
            start = k = k + 3
            continue
        k += 1
    terms.append((sign, rhs[start:]))
    return terms


def _is_equation(lhs):
    return lhs.endswith("/dt") or lhs.endswith("_t")


def parse_equations(text):
    """Parse printed equations.

    Returns ``(equations, params)``: ``equations`` maps each left-hand side to
    a list of ``(coefficient, label)`` pairs and ``params`` maps parameter
    names to values.
    """
    equations, params = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if " = " not in line:
            raise ContractError(f"line {lineno}: expected 'lhs = rhs'")
        lhs, rhs = (s.strip() for s in line.split(" = ", 1))
        try:
            if not _is_equation(lhs):
                params[lhs] = float(rhs)
                continue
            pairs = []
            if rhs != "0":
                for sign, term in _split_terms(rhs):
                    coef, label = term.split(" * ", 1)
                    pairs.append((sign * float(coef), label.strip()))
        except ValueError as exc:
            raise ContractError(f"line {lineno}: {exc}") from exc
        equations[lhs] = pairs
    return equations, params


def _coefficients(pairs, labels):
    index = {label: j for j, label in enumerate(labels)}
    out = np.zeros(len(labels))
    for c, label in pairs:
        if label not in index:
            raise ContractError(f"term {label!r} is not in the library")
        out[index[label]] += c
    return out


def parse_sindy(text, labels, var_names):
    """Rebuild the ``(n, d)`` coefficient matrix from printed SINDy equations."""
    equations, _ = parse_equations(text)
    cols = []
    for name in var_names:
        key = f"d{name}/dt"
        if key not in equations:
            raise ContractError(f"no equation for {name}")
        cols.append(_coefficients(equations[key], labels))
    return np.column_stack(cols)


def parse_pde(text, terms):
    """Rebuild ``(xi, params)`` from a printed PDE model."""
    equations, params = parse_equations(text)
    if "u_t" not in equations:
        raise ContractError("no u_t equation found")
    return _coefficients(equations["u_t"], terms), params
