import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from lpdense.generate import random_instance, random_lp, to_raw
from lpdense.model import standardize
from lpdense.mps import emit_mps, parse_mps


def highs(lp):
    return linprog(lp.c, A_eq=lp.A.to_scipy(), b_eq=lp.b,
                   bounds=[(0, None if np.isinf(u) else u) for u in lp.upper], method="highs")


def test_layout_and_feasibility():
    inst = random_instance(30, 70, 2, dense_frac=0.5, seed=1, upper_frac=0.3)
    lp = inst.lp
    counts = lp.A.col_counts()
    assert np.all(counts[-2:] == 15)
    assert np.all(counts[:-2] <= 3)
    assert_allclose(lp.A.to_scipy() @ inst.x, lp.b, atol=1e-12)
    assert np.all(inst.x[lp.upper_idx] < lp.upper_values())
    assert inst.optimal_objective is None


@pytest.mark.parametrize("seed", range(3))
def test_planted_optimum_is_optimal(seed):
    inst = random_instance(25, 50, 1, seed=seed, planted_optimum=True, upper_frac=0.2)
    ref = highs(inst.lp)
    assert ref.fun == pytest.approx(inst.optimal_objective, rel=1e-9)


def test_deficient_rows_break_sparse_rank():
    lp = random_lp(20, 40, 2, seed=0, deficient_rows=2)
    A = lp.A.to_dense()
    sparse = A[:, :-2]
    assert np.linalg.matrix_rank(sparse) == 18
    assert np.linalg.matrix_rank(A) == 20


def test_argument_checks():
    with pytest.raises(ValueError):
        random_lp(10, 10, 1)
    with pytest.raises(ValueError):
        random_lp(10, 30, 1, deficient_rows=2)
    with pytest.raises(ValueError):
        random_lp(10, 30, 1, deficient_rows=1, planted_optimum=True)


def test_seed_determinism():
    a, b = random_lp(15, 30, seed=7), random_lp(15, 30, seed=7)
    assert_allclose(a.A.to_dense(), b.A.to_dense())
    assert_allclose(a.c, b.c)


def test_mps_round_trip_keeps_problem():
    lp = random_lp(12, 30, 1, seed=2, upper_frac=0.3)
    back = standardize(parse_mps(emit_mps(to_raw(lp))), presolve_first=False)
    assert_allclose(back.A.to_dense(), lp.A.to_dense())
    assert_allclose(back.b, lp.b)
    assert_allclose(back.c, lp.c)
    assert_allclose(back.upper, lp.upper)
