import gzip
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from lpdense.errors import MpsParseError
from lpdense.mps import RawLp, emit_mps, parse_mps, read_mps
from lpdense.sparse import SparseMatrix

DATA = Path(__file__).resolve().parents[1] / "data" / "netlib"

MINIMAL = """NAME          TINY
ROWS
 N  COST
 E  R1
COLUMNS
    X1        COST      1.0        R1        1.0
RHS
    RHS       R1        1.0
ENDATA
"""


def _fixed(f1="", f2="", f3="", f4="", f5="", f6=""):
    """One fixed-format record: fields start at columns 2, 5, 15, 25, 40, 50."""
    line = " " + f1.ljust(2) + " " + f2.ljust(8) + "  " + f3.ljust(8) + "  " + f4.ljust(12)
    if f5:
        line += "   " + f5.ljust(8) + "  " + f6
    return line.rstrip()


FIXED = "\n".join([
    "NAME          FIXEDFMT",
    "ROWS",
    _fixed("N", "COST"),
    _fixed("L", "LIM1"),
    _fixed("G", "LIM2"),
    "COLUMNS",
    _fixed("", "X ONE", "COST", "1.0", "LIM1", "1.0"),
    _fixed("", "X ONE", "LIM2", "1.0"),
    _fixed("", "Y", "COST", "2.0", "LIM1", "1.0"),
    "RHS",
    _fixed("", "RHS", "LIM1", "4.0", "LIM2", "1.0"),
    "RANGES",
    _fixed("", "RNG", "LIM1", "2.5"),
    "BOUNDS",
    _fixed("UP", "BND", "X ONE", "4.0"),
    _fixed("MI", "BND", "Y"),
    "ENDATA",
]) + "\n"


def test_minimal_file():
    raw = parse_mps(MINIMAL)
    assert raw.name == "TINY"
    assert_allclose(raw.A.to_dense(), [[1.0]])
    assert_allclose(raw.b, [1.0])
    assert_allclose(raw.c, [1.0])
    assert raw.row_kinds == ["E"]
    assert raw.lower[0] == 0 and raw.upper[0] == np.inf


def test_free_bound():
    text = MINIMAL.replace("ENDATA", "BOUNDS\n FR BND       X1\nENDATA")
    raw = parse_mps(text)
    assert raw.lower[0] == -np.inf and raw.upper[0] == np.inf


def test_bound_kinds():
    text = MINIMAL.replace("    X1        COST      1.0        R1        1.0",
                           "    X1        COST      1.0        R1        1.0\n"
                           "    X2        COST      1.0        R1        1.0\n"
                           "    X3        COST      1.0        R1        1.0\n"
                           "    X4        COST      1.0        R1        1.0")
    text = text.replace("ENDATA", "BOUNDS\n UP BND X1 3\n FX BND X2 2\n MI BND X3\n LO BND X4 -1\n"
                                  " UP BND X4 5\nENDATA")
    raw = parse_mps(text)
    assert_allclose(raw.lower, [0, 2, -np.inf, -1])
    assert_allclose(raw.upper, [3, 2, np.inf, 5])


def test_negative_upper_on_default_lower():
    raw = parse_mps(MINIMAL.replace("ENDATA", "BOUNDS\n UP BND X1 -2\nENDATA"))
    assert raw.lower[0] == -np.inf and raw.upper[0] == -2


def test_fixed_format_names_with_spaces():
    raw = parse_mps(FIXED, fmt="fixed")
    assert raw.col_names == ["X ONE", "Y"]
    assert raw.row_kinds == ["L", "G"]
    assert_allclose(raw.A.to_dense(), [[1, 1], [1, 0]])
    assert_allclose(raw.b, [4, 1])
    assert raw.ranges[0] == 2.5 and np.isnan(raw.ranges[1])
    assert raw.upper[0] == 4 and raw.lower[1] == -np.inf


def test_objective_rhs_is_negated_constant():
    raw = parse_mps(MINIMAL.replace("    RHS       R1        1.0", "    RHS       R1        1.0   COST   5.0"))
    assert raw.obj_constant == -5.0


def test_gzip_bytes():
    raw = parse_mps(gzip.compress(MINIMAL.encode()))
    assert_allclose(raw.b, [1.0])


@pytest.mark.parametrize("text,line", [
    (MINIMAL.replace(" E  R1", " Q  R1"), 4),
    (MINIMAL.replace("COST      1.0", "COST      abc"), 6),
    (MINIMAL.replace("    RHS       R1        1.0", "    RHS       R9        1.0"), 8),
    (MINIMAL.replace("ENDATA", "BOUNDS\n BV BND X1\nENDATA"), 10),
])
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(MpsParseError) as info:
        parse_mps(text)
    assert info.value.line == line


def test_integer_markers_rejected():
    text = MINIMAL.replace("COLUMNS\n", "COLUMNS\n    M1  'MARKER'  'INTORG'\n")
    with pytest.raises(MpsParseError):
        parse_mps(text)


def test_missing_endata_is_an_error():
    with pytest.raises(MpsParseError):
        parse_mps(MINIMAL.replace("ENDATA\n", ""))


def assert_raw_equal(a: RawLp, b: RawLp):
    assert a.name == b.name
    assert a.row_names == b.row_names and a.col_names == b.col_names
    assert a.row_kinds == b.row_kinds
    assert_array_equal(a.A.to_dense(), b.A.to_dense())
    assert_array_equal(a.b, b.b)
    assert_array_equal(a.c, b.c)
    assert_array_equal(a.lower, b.lower)
    assert_array_equal(a.upper, b.upper)
    assert_array_equal(np.isnan(a.ranges), np.isnan(b.ranges))
    assert_array_equal(a.ranges[~np.isnan(a.ranges)], b.ranges[~np.isnan(b.ranges)])
    assert a.obj_constant == b.obj_constant


@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_emit_parse_round_trip(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) * (rng.random((m, n)) < 0.5)
    kinds = list(rng.choice(["E", "L", "G"], m))
    lower = rng.choice([0.0, -1.5, -np.inf], n)
    upper = np.where(rng.random(n) < 0.5, np.inf, lower + rng.uniform(0, 3, n))
    upper[np.isinf(lower) & np.isfinite(upper)] = 2.0
    ranges = np.where(rng.random(m) < 0.3, rng.uniform(0.1, 2, m), np.nan)
    raw = RawLp("RT", rng.standard_normal(n), SparseMatrix.from_dense(A), kinds, rng.standard_normal(m),
                lower, upper, [f"R{i}" for i in range(m)], [f"C{j}" for j in range(n)], ranges,
                obj_constant=float(rng.standard_normal()))
    assert_raw_equal(parse_mps(emit_mps(raw)), raw)


def test_netlib_round_trip():
    raw = read_mps(DATA / "fit1p.mps.gz")
    assert_raw_equal(parse_mps(emit_mps(raw)), raw)


def test_fit1p_raw_dimensions():
    raw = read_mps(DATA / "fit1p.mps.gz")
    assert raw.shape == (627, 1677)
    assert raw.A.nnz == 9868
