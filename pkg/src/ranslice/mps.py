"""MPS export of the linear model, a small MPS reader, and solution-file exchange."""

from __future__ import annotations

import hashlib
import io
import re
from dataclasses import dataclass, field

from .model import DecodeError, ModelIR, decode, encode
from .placement import Placement

MAX_NAME = 255
_BAD = re.compile(r"[^A-Za-z0-9_.]")


class MPSError(ValueError):
    pass


def _clean(part) -> str:
    return _BAD.sub("_", str(part))


def default_mangler(tag: tuple) -> str:
    """z_p{path}_s{slice} style names; anything past 255 chars is cut and suffixed with a hash."""
    kind, *parts = tag
    keys = {
        "z": ("p", "s"), "zd": ("p", "d", "s"), "fx": ("x",), "fv": ("x", "v", "s"),
        "fd": ("x", "d", "v", "s"), "ux": ("x",), "ul": ("l",), "kx": ("x",), "kl": ("l",),
        "dpro": ("x", "v", "s"), "dsel": ("x", "v", "s", "d"), "w": ("s", "d", "p", "i"),
    }.get(kind, ("",) * len(parts))
    name = "_".join([kind] + [f"{k}{_clean(p)}" for k, p in zip(keys, parts)])
    return _shorten(name)


def row_mangler(label: str) -> str:
    return _shorten(_clean(label.replace("[", "_").replace("]", "").replace(",", "_")))


def _shorten(name: str) -> str:
    if len(name) <= MAX_NAME:
        return name
    digest = hashlib.sha1(name.encode()).hexdigest()[:12]
    return f"{name[:MAX_NAME - 13]}_{digest}"


def _names(items, mangle):
    out, seen = [], {}
    for item in items:
        name = mangle(item)
        if name in seen:
            raise MPSError(f"name collision after mangling: {item!r} and {seen[name]!r} -> {name}")
        seen[name] = item
        out.append(name)
    return out


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _fixed(fields: list[str]) -> str:
    """Fixed-format card when every field fits its columns, otherwise whitespace separated
    (long names are common and accepted by the usual readers)."""
    starts, widths = (1, 4, 14, 24, 39, 49), (2, 8, 8, 12, 8, 12)
    if all(len(f) <= w for f, w in zip(fields, widths)):
        line = ""
        for f, col in zip(fields, starts):
            line = line.ljust(col) + f
        return line.rstrip()
    return " " + " ".join(f for f in fields if f) if fields[0] else "    " + " ".join(f for f in fields[1:] if f)


def export_mps(m: ModelIR, name_mangler=default_mangler, name: str = "RANSLICE") -> bytes:
    cols = _names([v.tag for v in m.vars], name_mangler)
    rows = _names([c.label for c in m.constraints], row_mangler)
    if "OBJ" in rows:
        raise MPSError("row name OBJ is reserved for the objective")
    by_col: list[list[tuple[str, float]]] = [[] for _ in m.vars]
    for i, c in m.objective.terms.items():
        by_col[i].append(("OBJ", c))
    for r, c in zip(rows, m.constraints):
        for i, coef in sorted(c.expr.terms.items()):
            by_col[i].append((r, coef))
    out = io.StringIO()
    out.write(f"NAME          {name}\nROWS\n N  OBJ\n")
    sense = {"<=": "L", ">=": "G", "==": "E"}
    for r, c in zip(rows, m.constraints):
        out.write(_fixed([sense[c.sense], r]) + "\n")
    out.write("COLUMNS\n")
    in_int = False
    marker = 0
    for v, col in zip(m.vars, cols):
        is_int = v.kind == "binary"
        if is_int != in_int:
            tag = "'INTORG'" if is_int else "'INTEND'"
            out.write(_fixed(["", f"MARKER{marker:02d}", "'MARKER'", "", tag]) + "\n")
            marker += 1
            in_int = is_int
        entries = by_col[v.index] or [("OBJ", 0.0)]
        for r, coef in entries:
            out.write(_fixed(["", col, r, _num(coef)]) + "\n")
    if in_int:
        out.write(_fixed(["", f"MARKER{marker:02d}", "'MARKER'", "", "'INTEND'"]) + "\n")
    out.write("RHS\n")
    for r, c in zip(rows, m.constraints):
        rhs = c.rhs - c.expr.constant
        if rhs != 0.0:
            out.write(_fixed(["", "RHS", r, _num(rhs)]) + "\n")
    if m.objective.constant:
        out.write(_fixed(["", "RHS", "OBJ", _num(-m.objective.constant)]) + "\n")
    out.write("BOUNDS\n")
    for v, col in zip(m.vars, cols):
        if v.kind == "binary":
            out.write(_fixed(["BV", "BND", col]) + "\n")
            continue
        if v.lo != 0.0:
            out.write(_fixed(["LO", "BND", col, _num(v.lo)]) + "\n")
        if v.hi != float("inf"):
            out.write(_fixed(["UP", "BND", col, _num(v.hi)]) + "\n")
    out.write("ENDATA\n")
    return out.getvalue().encode("ascii")


@dataclass
class MPSModel:
    """Parsed MPS content: enough to compare against the exported model."""

    name: str = ""
    objective_row: str = ""
    row_sense: dict[str, str] = field(default_factory=dict)
    columns: list[str] = field(default_factory=list)
    coefficients: dict[tuple[str, str], float] = field(default_factory=dict)
    rhs: dict[str, float] = field(default_factory=dict)
    ranges: dict[str, float] = field(default_factory=dict)
    integer: set[str] = field(default_factory=set)
    bounds: dict[str, list[float]] = field(default_factory=dict)

    def matrix(self) -> dict[tuple[str, str], float]:
        return {k: v for k, v in self.coefficients.items() if k[0] != self.objective_row}

    def objective(self) -> dict[str, float]:
        return {c: v for (r, c), v in self.coefficients.items() if r == self.objective_row}


def read_mps(data: bytes | str) -> MPSModel:
    text = data.decode("ascii") if isinstance(data, bytes) else data
    mdl = MPSModel()
    section = None
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                mdl.name = head[1] if len(head) > 1 else ""
            if section not in ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"):
                raise MPSError(f"unknown section {section}")
            continue
        f = raw.split()
        if section == "ROWS":
            kind, row = f
            if kind == "N" and not mdl.objective_row:
                mdl.objective_row = row
            mdl.row_sense[row] = kind
        elif section == "COLUMNS":
            if len(f) >= 3 and f[1] == "'MARKER'":
                in_int = f[2] == "'INTORG'"
                continue
            col = f[0]
            if not mdl.columns or mdl.columns[-1] != col:
                mdl.columns.append(col)
                mdl.bounds.setdefault(col, [0.0, float("inf")])
            if in_int:
                mdl.integer.add(col)
            for r, val in zip(f[1::2], f[2::2]):
                if r not in mdl.row_sense:
                    raise MPSError(f"column {col} references unknown row {r}")
                mdl.coefficients[(r, col)] = float(val)
        elif section == "RHS":
            for r, val in zip(f[1::2], f[2::2]):
                mdl.rhs[r] = float(val)
        elif section == "RANGES":
            for r, val in zip(f[1::2], f[2::2]):
                mdl.ranges[r] = float(val)
        elif section == "BOUNDS":
            kind, col = f[0], f[2]
            b = mdl.bounds.setdefault(col, [0.0, float("inf")])
            if kind == "BV":
                b[:] = [0.0, 1.0]
                mdl.integer.add(col)
            elif kind == "LO":
                b[0] = float(f[3])
            elif kind == "UP":
                b[1] = float(f[3])
            elif kind == "FX":
                b[:] = [float(f[3])] * 2
            elif kind == "FR":
                b[:] = [float("-inf"), float("inf")]
            elif kind == "MI":
                b[0] = float("-inf")
            else:
                raise MPSError(f"unsupported bound type {kind}")
        elif section == "ENDATA":
            break
    return mdl


# ---------------------------------------------------------------------------
# solution files


def dump_solution(m: ModelIR, values, name_mangler=default_mangler, objective: float | None = None) -> str:
    lines = ["# variable values, one 'name value' per line"]
    if objective is not None:
        lines.append(f"=obj= {_num(objective)}")
    for v, name in zip(m.vars, _names([v.tag for v in m.vars], name_mangler)):
        lines.append(f"{name} {_num(values[v.index])}")
    return "\n".join(lines) + "\n"


def dump_placement(m: ModelIR, placement: Placement, name_mangler=default_mangler) -> str:
    values = encode(m, placement)
    return dump_solution(m, values, name_mangler, m.objective.value(values))


def parse_solution(text: str) -> tuple[dict[str, float], float | None]:
    values, obj = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise MPSError(f"line {n}: expected 'name value'")
        try:
            val = float(parts[1])
        except ValueError:
            raise MPSError(f"line {n}: bad value {parts[1]!r}") from None
        if parts[0] == "=obj=":
            obj = val
        else:
            values[parts[0]] = val
    return values, obj


def import_solution(text: str, m: ModelIR, name_mangler=default_mangler) -> Placement:
    """Map a solution file back onto the model and decode it. Missing variables default to 0
    (only the binaries matter for decoding); unknown names are an error."""
    values, _ = parse_solution(text)
    index = {name: v.index for v, name in zip(m.vars, _names([v.tag for v in m.vars], name_mangler))}
    full = [0.0] * len(m.vars)
    for name, val in values.items():
        if name not in index:
            raise MPSError(f"unknown variable {name!r} in solution file")
        full[index[name]] = val
    return decode(m, full)


__all__ = ["MPSError", "MPSModel", "DecodeError", "default_mangler", "dump_placement", "dump_solution",
           "export_mps", "import_solution", "parse_solution", "read_mps", "row_mangler"]
