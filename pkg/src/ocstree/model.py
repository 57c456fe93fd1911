"""Solver-neutral mixed-integer model: exact rational data, bilinear terms,
McCormick-style exact linearization, LP text export/import, and validation.

Model data is held as `fractions.Fraction` so evaluation is exact; floating
point only appears inside the LP solver.
"""

from __future__ import annotations

import re
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

__all__ = [
    "ModelError",
    "LpParseError",
    "Variable",
    "BilinearTerm",
    "Constraint",
    "Model",
    "Assignment",
    "EvalResult",
    "as_fraction",
    "linearize",
    "export_lp",
    "import_lp",
    "evaluate",
    "format_assignment",
    "parse_assignment",
]

VAR_KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", ">=", "=")

DEFAULT_FEASIBILITY_TOL = Fraction(1, 10**6)
DEFAULT_INTEGRALITY_TOL = Fraction(1, 10**6)


class ModelError(ValueError):
    """Malformed model, or an operation applied to the wrong kind of model."""


class LpParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


def as_fraction(value) -> Fraction:
    """Exact conversion of ints, floats, numpy scalars and strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lb: Fraction | None  # None = -inf
    ub: Fraction | None  # None = +inf


@dataclass(frozen=True)
class BilinearTerm:
    coeff: Fraction
    u: str
    v: str


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, Fraction]
    sense: str
    rhs: Fraction
    bilinear: tuple[BilinearTerm, ...] = ()


class Model:
    """A minimization model built incrementally, then frozen.

    Builders are single-threaded per model; frozen models are immutable and
    safe to share.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.constraints: list[Constraint] = []
        self.objective_coeffs: dict[str, Fraction] = {}
        self.objective_bilinear: tuple[BilinearTerm, ...] = ()
        self.objective_constant: Fraction = Fraction(0)
        self._frozen = False
        self._constraint_names: set[str] = set()

    # -- construction -----------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise ModelError("model is frozen")

    def add_variable(self, name: str, kind: str = "continuous",
                     lb=None, ub=None) -> str:
        self._check_mutable()
        if kind not in VAR_KINDS:
            raise ModelError(f"unknown variable kind {kind!r}")
        if name in self.variables:
            raise ModelError(f"variable {name!r} already declared")
        if kind == "binary":
            lb = Fraction(0) if lb is None else as_fraction(lb)
            ub = Fraction(1) if ub is None else as_fraction(ub)
        else:
            lb = None if lb is None else as_fraction(lb)
            ub = None if ub is None else as_fraction(ub)
        if lb is not None and ub is not None and lb > ub:
            raise ModelError(f"variable {name!r} has empty bound range [{lb}, {ub}]")
        self.variables[name] = Variable(name, kind, lb, ub)
        return name

    def _check_terms(self, coeffs: Mapping, bilinear: Iterable[BilinearTerm]):
        for v in coeffs:
            if v not in self.variables:
                raise ModelError(f"undeclared variable {v!r}")
        for term in bilinear:
            for v in (term.u, term.v):
                if v not in self.variables:
                    raise ModelError(f"undeclared variable {v!r}")

    def add_constraint(self, coeffs: Mapping, sense: str, rhs,
                       name: str | None = None, bilinear=()) -> Constraint:
        self._check_mutable()
        if sense not in SENSES:
            raise ModelError(f"unknown sense {sense!r}")
        terms = tuple(
            t if isinstance(t, BilinearTerm) else BilinearTerm(as_fraction(t[0]), t[1], t[2])
            for t in bilinear
        )
        clean = {v: as_fraction(c) for v, c in coeffs.items() if as_fraction(c) != 0}
        self._check_terms(clean, terms)
        if name is None:
            name = f"c{len(self.constraints)}"
        if name in self._constraint_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        con = Constraint(name, clean, sense, as_fraction(rhs), terms)
        self.constraints.append(con)
        self._constraint_names.add(name)
        return con

    def set_objective(self, coeffs: Mapping | None = None, constant=0, bilinear=()):
        self._check_mutable()
        terms = tuple(
            t if isinstance(t, BilinearTerm) else BilinearTerm(as_fraction(t[0]), t[1], t[2])
            for t in bilinear
        )
        clean = {v: as_fraction(c) for v, c in (coeffs or {}).items() if as_fraction(c) != 0}
        self._check_terms(clean, terms)
        self.objective_coeffs = clean
        self.objective_bilinear = terms
        self.objective_constant = as_fraction(constant)

    def freeze(self) -> "Model":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    # -- inspection --------------------------------------------------------

    @property
    def is_linear(self) -> bool:
        if self.objective_bilinear:
            return False
        return all(not c.bilinear for c in self.constraints)

    def bilinear_products(self) -> list[BilinearTerm]:
        out = list(self.objective_bilinear)
        for c in self.constraints:
            out.extend(c.bilinear)
        return out

    def var_names(self) -> tuple[str, ...]:
        return tuple(self.variables)

    def copy(self, name: str | None = None) -> "Model":
        """Unfrozen deep-enough copy (Fractions and tuples are immutable)."""
        m = Model(name or self.name)
        m.variables = dict(self.variables)
        m.constraints = [
            Constraint(c.name, dict(c.coeffs), c.sense, c.rhs, c.bilinear)
            for c in self.constraints
        ]
        m.objective_coeffs = dict(self.objective_coeffs)
        m.objective_bilinear = self.objective_bilinear
        m.objective_constant = self.objective_constant
        m._constraint_names = set(self._constraint_names)
        return m

    def structurally_equal(self, other: "Model") -> bool:
        """Equality up to term ordering: same variables, constraints, objective."""
        if set(self.variables) != set(other.variables):
            return False
        for name, var in self.variables.items():
            o = other.variables[name]
            if (var.kind, var.lb, var.ub) != (o.kind, o.lb, o.ub):
                return False
        if len(self.constraints) != len(other.constraints):
            return False
        for a, b in zip(self.constraints, other.constraints):
            if (a.name, a.sense, a.rhs) != (b.name, b.sense, b.rhs):
                return False
            if a.coeffs != b.coeffs:
                return False
            if sorted((t.coeff, t.u, t.v) for t in a.bilinear) != sorted(
                (t.coeff, t.u, t.v) for t in b.bilinear
            ):
                return False
        return (
            self.objective_coeffs == other.objective_coeffs
            and self.objective_constant == other.objective_constant
            and sorted((t.coeff, t.u, t.v) for t in self.objective_bilinear)
            == sorted((t.coeff, t.u, t.v) for t in other.objective_bilinear)
        )


class Assignment(Mapping):
    """Map from variable name to exact rational value."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping):
        self._values = {str(k): as_fraction(v) for k, v in dict(values).items()}

    def __getitem__(self, key):
        return self._values[key]

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return f"Assignment({len(self._values)} values)"

    def covers(self, model: Model) -> bool:
        return all(name in self._values for name in model.variables)


def format_assignment(assignment: Mapping) -> str:
    """Serialize as "name value" lines; exact rationals written as p/q."""
    lines = []
    for name in sorted(assignment):
        v = as_fraction(assignment[name])
        text = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        lines.append(f"{name} {text}")
    return "\n".join(lines) + "\n"


def parse_assignment(text: str) -> Assignment:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'name value', got {line!r}")
        values[parts[0]] = Fraction(parts[1])
    return Assignment(values)


# -- linearization ----------------------------------------------------------


def linearize(model: Model) -> Model:
    """Replace every bilinear term x*v (x binary, v bounded) exactly.

    Each distinct product gets one fresh variable z and the four constraints
    z <= ub*x, z >= lb*x, z <= v - lb*(1-x), z >= v - ub*(1-x); for 0/1 x and
    in-bounds v, these force z = x*v, so integral feasible sets are in
    objective-preserving bijection with the original model's.
    """
    out = model.copy()
    products: dict[tuple[str, str], str] = {}
    counter = 0

    def z_for(u: str, v: str) -> str:
        nonlocal counter
        key = (u, v) if u <= v else (v, u)
        if key in products:
            return products[key]
        vu, vv = out.variables[u], out.variables[v]
        if vu.kind == "binary" and vv.kind == "binary":
            x_name, other = key
        elif vu.kind == "binary":
            x_name, other = u, v
        elif vv.kind == "binary":
            x_name, other = v, u
        else:
            raise ModelError(f"bilinear term {u}*{v} has no binary factor")
        bounds = out.variables[other]
        if bounds.lb is None or bounds.ub is None:
            raise ModelError(f"bilinear co-factor {other!r} must have finite bounds")
        lo, hi = bounds.lb, bounds.ub
        z = f"z{counter}"
        counter += 1
        while z in out.variables:
            z += "_"
        out.add_variable(z, "continuous", min(Fraction(0), lo), max(Fraction(0), hi))
        out.add_constraint({z: 1, x_name: -hi}, "<=", 0, name=f"{z}_cap")
        out.add_constraint({z: 1, x_name: -lo}, ">=", 0, name=f"{z}_floor")
        out.add_constraint({z: 1, other: -1, x_name: -lo}, "<=", -lo, name=f"{z}_ub")
        out.add_constraint({z: 1, other: -1, x_name: -hi}, ">=", -hi, name=f"{z}_lb")
        products[key] = z
        return z

    def fold(coeffs: dict[str, Fraction], terms: tuple[BilinearTerm, ...]):
        for term in terms:
            z = z_for(term.u, term.v)
            coeffs[z] = coeffs.get(z, Fraction(0)) + term.coeff
            if coeffs[z] == 0:
                del coeffs[z]

    # New z constraints are appended after the originals; walk a snapshot.
    for con in list(out.constraints):
        if con.bilinear:
            fold(con.coeffs, con.bilinear)
            con.bilinear = ()
    if out.objective_bilinear:
        coeffs = dict(out.objective_coeffs)
        fold(coeffs, out.objective_bilinear)
        out.objective_coeffs = coeffs
        out.objective_bilinear = ()
    return out.freeze()


# -- evaluation --------------------------------------------------------------


@dataclass
class EvalResult:
    objective: Fraction
    violations: list[tuple[str, Fraction]] = field(default_factory=list)
    integrality: list[tuple[str, Fraction]] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations and not self.integrality


def evaluate(model: Model, assignment: Mapping, tol=DEFAULT_FEASIBILITY_TOL,
             int_tol=DEFAULT_INTEGRALITY_TOL) -> EvalResult:
    """Exact check of an assignment against a model.

    Returns the exact objective value, constraint and bound violations whose
    residual exceeds ``tol``, and integrality violations beyond ``int_tol``.
    """
    tol = as_fraction(tol)
    int_tol = as_fraction(int_tol)
    values: dict[str, Fraction] = {}
    for name in model.variables:
        if name not in assignment:
            raise ModelError(f"assignment missing variable {name!r}")
        values[name] = as_fraction(assignment[name])

    def expr_value(coeffs: Mapping, bilinear) -> Fraction:
        total = sum((c * values[v] for v, c in coeffs.items()), Fraction(0))
        for term in bilinear:
            total += term.coeff * values[term.u] * values[term.v]
        return total

    violations: list[tuple[str, Fraction]] = []
    for con in model.constraints:
        lhs = expr_value(con.coeffs, con.bilinear)
        if con.sense == "<=":
            residual = lhs - con.rhs
        elif con.sense == ">=":
            residual = con.rhs - lhs
        else:
            residual = abs(lhs - con.rhs)
        if residual > tol:
            violations.append((con.name, residual))

    for name, var in model.variables.items():
        v = values[name]
        if var.lb is not None and var.lb - v > tol:
            violations.append((f"lb[{name}]", var.lb - v))
        if var.ub is not None and v - var.ub > tol:
            violations.append((f"ub[{name}]", v - var.ub))

    integrality: list[tuple[str, Fraction]] = []
    for name, var in model.variables.items():
        if var.kind in ("binary", "integer"):
            v = values[name]
            nearest = Fraction(round(v))
            if abs(v - nearest) > int_tol:
                integrality.append((name, abs(v - nearest)))

    objective = expr_value(model.objective_coeffs, model.objective_bilinear)
    objective += model.objective_constant
    return EvalResult(objective, violations, integrality)


# -- LP text format -----------------------------------------------------------


def _fmt_number(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def _fmt_terms(coeffs: Mapping, constant: Fraction = Fraction(0)) -> str:
    parts: list[str] = []
    for name in sorted(coeffs):
        c = coeffs[name]
        if c == 0:
            continue
        mag = abs(c)
        body = name if mag == 1 else f"{_fmt_number(mag)} {name}"
        if not parts:
            parts.append(body if c > 0 else f"- {body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    if constant != 0:
        text = _fmt_number(abs(constant))
        if not parts:
            parts.append(text if constant > 0 else f"- {text}")
        else:
            parts.append(f"+ {text}" if constant > 0 else f"- {text}")
    return " ".join(parts) if parts else "0"


def export_lp(model: Model) -> str:
    """Write a linear model in LP text format (deterministic variable order).

    Rationals are serialized as shortest round-tripping decimal floats, which
    is exact for all data that originated as machine numbers.
    """
    if not model.is_linear:
        raise ModelError("model has bilinear terms; linearize before export")
    lines = [f"\\ {model.name}", "Minimize"]
    lines.append(f" obj: {_fmt_terms(model.objective_coeffs, model.objective_constant)}")
    lines.append("Subject To")
    for con in model.constraints:
        lines.append(f" {con.name}: {_fmt_terms(con.coeffs)} {con.sense} {_fmt_number(con.rhs)}")
    lines.append("Bounds")
    for name in sorted(model.variables):
        var = model.variables[name]
        if var.lb is None and var.ub is None:
            lines.append(f" {name} free")
        else:
            lo = "-inf" if var.lb is None else _fmt_number(var.lb)
            hi = "+inf" if var.ub is None else _fmt_number(var.ub)
            lines.append(f" {lo} <= {name} <= {hi}")
    binaries = sorted(n for n, v in model.variables.items() if v.kind == "binary")
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    generals = sorted(n for n, v in model.variables.items() if v.kind == "integer")
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op><=|>=|=|\+|-|:)"
)

_SECTIONS = {
    "minimize": "objective",
    "min": "objective",
    "subject to": "constraints",
    "st": "constraints",
    "s.t.": "constraints",
    "bounds": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "generals": "generals",
    "general": "generals",
    "gen": "generals",
    "end": "end",
}


@dataclass
class _Tok:
    kind: str  # num | name | op
    text: str
    line: int
    col: int


def _tokenize_line(line: str, lineno: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(line):
        ch = line[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == "\\":
            break  # comment to end of line
        m = _TOKEN_RE.match(line, pos)
        if not m:
            raise LpParseError(f"unexpected character {ch!r}", lineno, pos + 1)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    return toks


def _parse_expr(toks: list[_Tok], idx: int, stop_ops=("<=", ">=", "=")):
    """Parse signed terms until a stop operator or end of tokens.

    Returns (coeffs, constant, next_idx).
    """
    coeffs: dict[str, Fraction] = {}
    constant = Fraction(0)
    sign = Fraction(1)
    pending_sign = False
    while idx < len(toks):
        tok = toks[idx]
        if tok.kind == "op" and tok.text in stop_ops:
            break
        if tok.kind == "op" and tok.text in ("+", "-"):
            if tok.text == "-":
                sign = -sign
            pending_sign = True
            idx += 1
            continue
        if tok.kind == "num":
            value = sign * as_fraction(float(tok.text))
            idx += 1
            if idx < len(toks) and toks[idx].kind == "name":
                name = toks[idx].text
                coeffs[name] = coeffs.get(name, Fraction(0)) + value
                idx += 1
            else:
                constant += value
            sign = Fraction(1)
            pending_sign = False
            continue
        if tok.kind == "name":
            coeffs[tok.text] = coeffs.get(tok.text, Fraction(0)) + sign
            idx += 1
            sign = Fraction(1)
            pending_sign = False
            continue
        raise LpParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)
    if pending_sign:
        tok = toks[idx - 1]
        raise LpParseError("dangling sign", tok.line, tok.col)
    return coeffs, constant, idx


def _parse_bound_value(toks: list[_Tok], idx: int):
    """Parse a possibly signed number or +/-inf. Returns (value|None, next_idx)."""
    sign = 1
    tok = toks[idx]
    if tok.kind == "op" and tok.text in ("+", "-"):
        sign = -1 if tok.text == "-" else 1
        idx += 1
        tok = toks[idx]
    if tok.kind == "name" and tok.text.lower() in ("inf", "infinity"):
        return None, idx + 1
    if tok.kind != "num":
        raise LpParseError(f"expected number, got {tok.text!r}", tok.line, tok.col)
    return sign * as_fraction(float(tok.text)), idx + 1


def import_lp(text: str) -> Model:
    """Parse LP text written by export_lp (plus comments and blank lines)."""
    model = Model("imported")
    kinds: dict[str, str] = {}
    bounds: dict[str, tuple[Fraction | None, Fraction | None]] = {}
    order: list[str] = []
    raw_constraints: list[tuple[str | None, dict, str, Fraction]] = []
    objective: tuple[dict, Fraction] | None = None

    def note_vars(coeffs):
        for v in coeffs:
            if v not in kinds:
                kinds[v] = "continuous"
                order.append(v)

    section = None
    auto_name = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        lowered = stripped.lower()
        if lowered in _SECTIONS:
            section = _SECTIONS[lowered]
            continue
        toks = _tokenize_line(line, lineno)
        if not toks:
            continue
        if section is None:
            raise LpParseError("content before Minimize section", lineno, 1)
        if section == "end":
            raise LpParseError("content after End", lineno, 1)
        if section == "objective":
            idx = 0
            if len(toks) >= 2 and toks[0].kind == "name" and toks[1].text == ":":
                idx = 2
            coeffs, constant, idx = _parse_expr(toks, idx, stop_ops=())
            if idx != len(toks):
                t = toks[idx]
                raise LpParseError(f"unexpected token {t.text!r}", t.line, t.col)
            note_vars(coeffs)
            if objective is None:
                objective = (coeffs, constant)
            else:  # objective continued on a following line
                merged, const0 = objective
                for v, c in coeffs.items():
                    merged[v] = merged.get(v, Fraction(0)) + c
                objective = (merged, const0 + constant)
        elif section == "constraints":
            idx = 0
            name = None
            if len(toks) >= 2 and toks[0].kind == "name" and toks[1].text == ":":
                name = toks[0].text
                idx = 2
            coeffs, constant, idx = _parse_expr(toks, idx)
            if idx >= len(toks):
                raise LpParseError("constraint is missing a sense", lineno, len(line))
            sense = toks[idx].text
            value, idx = _parse_bound_value(toks, idx + 1)
            if value is None:
                raise LpParseError("infinite right-hand side", lineno, 1)
            if idx != len(toks):
                t = toks[idx]
                raise LpParseError(f"unexpected token {t.text!r}", t.line, t.col)
            note_vars(coeffs)
            if name is None:
                name = f"c{auto_name}"
            auto_name += 1
            raw_constraints.append((name, coeffs, sense, value - constant))
        elif section == "bounds":
            # forms: name free | lo <= name <= hi | lo <= name | name <= hi | name = v
            if len(toks) == 2 and toks[0].kind == "name" and toks[1].text.lower() == "free":
                name = toks[0].text
                if name not in kinds:
                    kinds[name] = "continuous"
                    order.append(name)
                bounds[name] = (None, None)
                continue
            idx = 0
            lo = None
            first = toks[0]
            starts_with_value = (
                first.kind == "num"
                or first.text in ("+", "-")
                or (first.kind == "name" and first.text.lower() in ("inf", "infinity"))
            )
            if starts_with_value:
                lo, idx = _parse_bound_value(toks, 0)
                if idx >= len(toks) or toks[idx].text != "<=":
                    t = toks[min(idx, len(toks) - 1)]
                    raise LpParseError("expected <= in bound", t.line, t.col)
                idx += 1
            if idx >= len(toks) or toks[idx].kind != "name":
                t = toks[min(idx, len(toks) - 1)]
                raise LpParseError("expected variable name in bound", t.line, t.col)
            name = toks[idx].text
            idx += 1
            hi = None
            has_upper = False
            if idx < len(toks):
                op = toks[idx].text
                if op not in ("<=", "="):
                    t = toks[idx]
                    raise LpParseError(f"unexpected token {t.text!r} in bound", t.line, t.col)
                hi, idx2 = _parse_bound_value(toks, idx + 1)
                has_upper = True
                if op == "=":
                    lo = hi
                if idx2 != len(toks):
                    t = toks[idx2]
                    raise LpParseError(f"unexpected token {t.text!r}", t.line, t.col)
            if name not in kinds:
                kinds[name] = "continuous"
                order.append(name)
            prev_lo, prev_hi = bounds.get(name, (None, None))
            if has_upper:
                bounds[name] = (lo, hi)
            else:  # "lo <= name": keep any previously seen upper bound
                bounds[name] = (lo, prev_hi)
        elif section in ("binaries", "generals"):
            for tok in toks:
                if tok.kind != "name":
                    raise LpParseError(f"expected variable name, got {tok.text!r}",
                                       tok.line, tok.col)
                if tok.text not in kinds:
                    kinds[tok.text] = "continuous"
                    order.append(tok.text)
                kinds[tok.text] = "binary" if section == "binaries" else "integer"

    if objective is None:
        raise LpParseError("missing objective", 1, 1)

    for name in order:
        kind = kinds[name]
        lo, hi = bounds.get(name, (Fraction(0), Fraction(1)) if kind == "binary" else (None, None))
        model.add_variable(name, kind, lo, hi)
    for name, coeffs, sense, rhs in raw_constraints:
        model.add_constraint(coeffs, sense, rhs, name=name)
    coeffs, constant = objective
    model.set_objective(coeffs, constant)
    return model.freeze()
