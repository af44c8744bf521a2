import numpy as np
import pytest
import scipy.sparse as sp

from lpdense.cholesky import symbolic_factorize
from lpdense.sparse import Permutation, SparseMatrix


def fill_in(pattern: SparseMatrix, order) -> int:
    """Entries of L beyond the lower triangle of the permuted pattern."""
    if not isinstance(order, Permutation):
        order = Permutation.from_order(order)
    sym = symbolic_factorize(pattern, order)
    low = sp.tril(pattern.to_scipy()).nnz
    full = pattern.to_scipy()
    if (full != full.T).nnz == 0:
        low = sp.tril(full).nnz
    return sym.nnz - low


def random_spd(rng, n, density=0.3, shift=1.0):
    B = sp.random(n, n, density=density, random_state=rng).toarray()
    M = B @ B.T + shift * np.eye(n)
    return M


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Print one acceptance line immediately and again in the session summary."""
    def emit(criterion, ok, detail):
        line = f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
