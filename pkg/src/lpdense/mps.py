"""Reading and writing LPs in MPS format (fixed and free variants)."""
from __future__ import annotations

import gzip
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MpsParseError
from .sparse import SparseMatrix

SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA")
ROW_KINDS = ("E", "L", "G")
# fixed-format field columns (0-based, end exclusive)
_FIXED_FIELDS = ((1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61))


@dataclass(eq=False)
class RawLp:
    """An LP as written in an MPS file.

    ``min c^T x + obj_constant`` subject to ``A x (kind) b`` row by row,
    optional ranges (``nan`` where absent) and ``lower <= x <= upper``.
    """

    name: str
    c: np.ndarray
    A: SparseMatrix
    row_kinds: list
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_names: list
    col_names: list
    ranges: np.ndarray = None
    obj_name: str = "OBJ"
    obj_constant: float = 0.0

    def __post_init__(self):
        m, n = self.A.shape
        self.c = np.asarray(self.c, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.ranges is None:
            self.ranges = np.full(m, np.nan)
        self.ranges = np.asarray(self.ranges, dtype=np.float64)
        if (self.c.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,)
                or self.b.shape != (m,) or self.ranges.shape != (m,)
                or len(self.row_kinds) != m or len(self.row_names) != m
                or len(self.col_names) != n):
            raise ValueError("inconsistent RawLp dimensions")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("right-hand side must be finite")
        bad = [k for k in self.row_kinds if k not in ROW_KINDS]
        if bad:
            raise ValueError(f"unknown row kinds {sorted(set(bad))}")

    @property
    def shape(self):
        return self.A.shape


@dataclass
class _Builder:
    name: str = ""
    obj_name: str | None = None
    row_index: dict = field(default_factory=dict)
    row_names: list = field(default_factory=list)
    row_kinds: list = field(default_factory=list)
    free_rows: set = field(default_factory=set)
    col_index: dict = field(default_factory=dict)
    col_names: list = field(default_factory=list)
    entries: dict = field(default_factory=dict)
    cost: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    obj_constant: float = 0.0
    rhs_set: str | None = None
    range_set: str | None = None
    bound_set: str | None = None


def _number(tok, line):
    try:
        val = float(tok)
    except ValueError:
        raise MpsParseError(f"expected a number, got {tok!r}", line) from None
    if math.isnan(val):
        raise MpsParseError("NaN is not a valid coefficient", line)
    return val


def _split_fixed(raw):
    out = []
    for a, b in _FIXED_FIELDS:
        tok = raw[a:b].strip()
        if tok:
            out.append(tok)
    return out


def _lines(data):
    if isinstance(data, bytes):
        if data[:2] == b"\x1f\x8b":
            data = gzip.decompress(data)
        data = data.decode("ascii", errors="replace")
    for lineno, raw in enumerate(data.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        yield lineno, raw.rstrip()


def parse_mps(data, fmt="auto") -> RawLp:
    """Parse MPS text (``str`` or ``bytes``, optionally gzip-compressed).

    Parameters
    ----------
    data : str or bytes
    fmt : {"auto", "free", "fixed"}
        ``"free"`` splits on whitespace; ``"fixed"`` reads the classic
        column fields, which allows blanks inside names; ``"auto"`` behaves
        like ``"free"``, which covers every file whose names have no blanks.

    Raises
    ------
    MpsParseError
        On misplaced sections, unknown names, bad numbers or unsupported
        bound types.  The message carries the offending line number.
    """
    if fmt not in ("auto", "free", "fixed"):
        raise ValueError(f"unknown MPS format {fmt!r}")
    bld = _Builder()
    section = None
    seen = []
    for lineno, raw in _lines(data):
        if not raw[0].isspace():
            head = raw.split()
            key = head[0].upper()
            if key == "OBJSENSE":
                if len(head) > 1 and head[1].upper() in ("MAX", "MAXIMIZE"):
                    raise MpsParseError("maximization problems are not supported", lineno)
                section = "OBJSENSE"
                continue
            if key not in SECTIONS:
                if section == "OBJSENSE" and key in ("MIN", "MINIMIZE"):
                    continue
                if section == "OBJSENSE":
                    raise MpsParseError("maximization problems are not supported", lineno)
                raise MpsParseError(f"unknown section {head[0]!r}", lineno)
            if seen and SECTIONS.index(key) <= SECTIONS.index(seen[-1]):
                raise MpsParseError(f"section {key} out of order", lineno)
            if key != "NAME" and "ROWS" not in seen and key != "ROWS":
                raise MpsParseError(f"section {key} before ROWS", lineno)
            if key in ("RHS", "RANGES", "BOUNDS") and "COLUMNS" not in seen:
                raise MpsParseError(f"section {key} before COLUMNS", lineno)
            seen.append(key)
            section = key
            if key == "NAME":
                bld.name = " ".join(head[1:])
            if key == "ENDATA":
                break
            continue
        if section == "OBJSENSE":
            if raw.split()[0].upper() in ("MAX", "MAXIMIZE"):
                raise MpsParseError("maximization problems are not supported", lineno)
            continue
        if section in (None, "NAME", "ENDATA"):
            raise MpsParseError("data line outside of a section", lineno)
        toks = _split_fixed(raw) if fmt == "fixed" else raw.split()
        _HANDLERS[section](bld, toks, lineno)
    if "ENDATA" not in seen:
        raise MpsParseError("missing ENDATA")
    if "COLUMNS" not in seen:
        raise MpsParseError("missing COLUMNS section")
    return _finish(bld)


def _on_row(bld, toks, line):
    if len(toks) != 2:
        raise MpsParseError("ROWS entries need a kind and a name", line)
    kind, name = toks[0].upper(), toks[1]
    if name in bld.row_index or name == bld.obj_name or name in bld.free_rows:
        raise MpsParseError(f"duplicate row {name!r}", line)
    if kind == "N":
        if bld.obj_name is None:
            bld.obj_name = name
        else:
            bld.free_rows.add(name)
        return
    if kind not in ROW_KINDS:
        raise MpsParseError(f"unknown row kind {kind!r}", line)
    bld.row_index[name] = len(bld.row_names)
    bld.row_names.append(name)
    bld.row_kinds.append(kind)


def _pairs(toks, line, start):
    rest = toks[start:]
    if not rest or len(rest) % 2:
        raise MpsParseError("expected name/value pairs", line)
    return [(rest[i], _number(rest[i + 1], line)) for i in range(0, len(rest), 2)]


def _on_column(bld, toks, line):
    if len(toks) >= 3 and toks[1].strip("'").upper() == "MARKER":
        raise MpsParseError("integer markers are not supported", line)
    if len(toks) not in (3, 5):
        raise MpsParseError("COLUMNS entries need a column and one or two pairs", line)
    col = toks[0]
    j = bld.col_index.get(col)
    if j is None:
        j = bld.col_index[col] = len(bld.col_names)
        bld.col_names.append(col)
    for row, val in _pairs(toks, line, 1):
        if row == bld.obj_name:
            bld.cost[j] = bld.cost.get(j, 0.0) + val
        elif row in bld.free_rows:
            continue
        else:
            i = bld.row_index.get(row)
            if i is None:
                raise MpsParseError(f"unknown row {row!r}", line)
            bld.entries[(i, j)] = bld.entries.get((i, j), 0.0) + val


def _set_entries(bld, toks, line, attr):
    # the set name is optional in free MPS: odd token count means it is present
    start = len(toks) % 2
    if start:
        setname = toks[0]
        current = getattr(bld, attr + "_set")
        if current is None:
            setattr(bld, attr + "_set", setname)
        elif current != setname:
            return []
    return _pairs(toks, line, start)


def _on_rhs(bld, toks, line):
    for row, val in _set_entries(bld, toks, line, "rhs"):
        if row == bld.obj_name:
            bld.obj_constant = -val
            continue
        if row in bld.free_rows:
            continue
        i = bld.row_index.get(row)
        if i is None:
            raise MpsParseError(f"unknown row {row!r}", line)
        bld.rhs[i] = val


def _on_range(bld, toks, line):
    for row, val in _set_entries(bld, toks, line, "range"):
        i = bld.row_index.get(row)
        if i is None:
            raise MpsParseError(f"unknown row {row!r}", line)
        bld.ranges[i] = val


_VALUED = ("UP", "LO", "FX")
_UNVALUED = ("FR", "MI", "PL")


def _on_bound(bld, toks, line):
    kind = toks[0].upper()
    if kind in ("BV", "LI", "UI", "SC", "SI"):
        raise MpsParseError(f"bound type {kind} (integer/semicontinuous) is not supported", line)
    if kind in _VALUED:
        if len(toks) == 4:
            setname, col, val = toks[1], toks[2], _number(toks[3], line)
        elif len(toks) == 3:
            setname, col, val = None, toks[1], _number(toks[2], line)
        else:
            raise MpsParseError(f"bound {kind} needs a column and a value", line)
    elif kind in _UNVALUED:
        if len(toks) == 3:
            setname, col = toks[1], toks[2]
        elif len(toks) == 2:
            setname, col = None, toks[1]
        else:
            raise MpsParseError(f"bound {kind} takes a column only", line)
        val = None
    else:
        raise MpsParseError(f"unknown bound type {kind!r}", line)
    if setname is not None:
        if bld.bound_set is None:
            bld.bound_set = setname
        elif bld.bound_set != setname:
            return
    j = bld.col_index.get(col)
    if j is None:
        raise MpsParseError(f"unknown column {col!r}", line)
    bld.bounds.setdefault(j, []).append((kind, val))


_HANDLERS = {
    "ROWS": _on_row,
    "COLUMNS": _on_column,
    "RHS": _on_rhs,
    "RANGES": _on_range,
    "BOUNDS": _on_bound,
}


def _finish(bld) -> RawLp:
    m, n = len(bld.row_names), len(bld.col_names)
    if bld.entries:
        keys = np.array(list(bld.entries.keys()), dtype=np.int64)
        vals = np.fromiter(bld.entries.values(), dtype=np.float64, count=len(bld.entries))
        A = SparseMatrix.from_triplets(m, n, keys[:, 0], keys[:, 1], vals)
    else:
        A = SparseMatrix.empty(m, n)
    c = np.zeros(n)
    for j, v in bld.cost.items():
        c[j] = v
    b = np.zeros(m)
    for i, v in bld.rhs.items():
        b[i] = v
    ranges = np.full(m, np.nan)
    for i, v in bld.ranges.items():
        ranges[i] = v
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    for j, items in bld.bounds.items():
        for kind, val in items:
            if kind == "UP":
                upper[j] = val
                if val < 0 and lower[j] == 0:
                    lower[j] = -np.inf
            elif kind == "LO":
                lower[j] = val
            elif kind == "FX":
                lower[j] = upper[j] = val
            elif kind == "FR":
                lower[j], upper[j] = -np.inf, np.inf
            elif kind == "MI":
                lower[j] = -np.inf
            elif kind == "PL":
                upper[j] = np.inf
    return RawLp(bld.name, c, A, bld.row_kinds, b, lower, upper, bld.row_names,
                 bld.col_names, ranges, bld.obj_name or "OBJ", bld.obj_constant)


def read_mps(path, fmt="auto") -> RawLp:
    """Read an MPS file; ``.gz`` files are decompressed transparently."""
    return parse_mps(Path(path).read_bytes(), fmt=fmt)


def _num(v):
    return repr(float(v))


def emit_mps(raw: RawLp) -> str:
    """Serialize ``raw`` as free-format MPS with round-trip exact numbers."""
    out = [f"NAME {raw.name}".rstrip(), "ROWS", f" N {raw.obj_name}"]
    out += [f" {k} {nm}" for k, nm in zip(raw.row_kinds, raw.row_names)]
    out.append("COLUMNS")
    A = raw.A
    for j, cname in enumerate(raw.col_names):
        lo, hi = A.col_ptr[j], A.col_ptr[j + 1]
        if raw.c[j] != 0.0:
            out.append(f" {cname} {raw.obj_name} {_num(raw.c[j])}")
        for p in range(lo, hi):
            out.append(f" {cname} {raw.row_names[A.row_idx[p]]} {_num(A.values[p])}")
        if lo == hi and raw.c[j] == 0.0:
            # keep empty columns visible to the reader
            out.append(f" {cname} {raw.obj_name} 0.0")
    out.append("RHS")
    if raw.obj_constant != 0.0:
        out.append(f" RHS {raw.obj_name} {_num(-raw.obj_constant)}")
    for i, v in enumerate(raw.b):
        if v != 0.0:
            out.append(f" RHS {raw.row_names[i]} {_num(v)}")
    has_range = ~np.isnan(raw.ranges)
    if has_range.any():
        out.append("RANGES")
        for i in np.flatnonzero(has_range):
            out.append(f" RNG {raw.row_names[i]} {_num(raw.ranges[i])}")
    bound_lines = []
    for j, cname in enumerate(raw.col_names):
        lo, hi = raw.lower[j], raw.upper[j]
        if lo == hi:
            bound_lines.append(f" FX BND {cname} {_num(lo)}")
            continue
        if lo == -np.inf and hi == np.inf:
            bound_lines.append(f" FR BND {cname}")
            continue
        if lo == -np.inf:
            bound_lines.append(f" MI BND {cname}")
        elif lo != 0.0:
            bound_lines.append(f" LO BND {cname} {_num(lo)}")
        if hi != np.inf:
            if hi < 0 and lo == -np.inf:
                # reader would turn a negative UP with lower 0 into MI; MI is already set
                pass
            elif hi < 0 and lo == 0.0:
                bound_lines.append(f" LO BND {cname} 0.0")
            bound_lines.append(f" UP BND {cname} {_num(hi)}")
    if bound_lines:
        out.append("BOUNDS")
        out += bound_lines
    out.append("ENDATA")
    return "\n".join(out) + "\n"
