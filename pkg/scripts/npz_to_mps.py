"""Convert a scipy linprog benchmark ``.npz`` file to gzipped MPS.

The Netlib problems FIT1P and FIT2P ship as ``.npz`` files in the scipy
source distribution (``benchmarks/benchmarks/linprog_benchmark_files``,
BSD licensed).  They store ``c``, ``A_eq``, ``b_eq``, ``A_ub``, ``b_ub`` and
per-variable ``bounds`` (``None`` meaning unbounded above).

Usage::

    python scripts/npz_to_mps.py FIT1P.npz data/netlib/fit1p.mps.gz
"""
import argparse
import gzip

import numpy as np
import scipy.sparse as sp

from lpdense.mps import RawLp, emit_mps, parse_mps
from lpdense.sparse import SparseMatrix


def load_npz(path, name):
    data = np.load(path, allow_pickle=True)
    c = np.asarray(data["c"], dtype=float)
    n = c.size
    blocks, kinds, rhs = [], [], []
    for key_a, key_b, kind in (("A_eq", "b_eq", "E"), ("A_ub", "b_ub", "L")):
        A = np.asarray(data[key_a], dtype=float)
        if A.size == 0:
            continue
        blocks.append(sp.csc_matrix(A.reshape(-1, n)))
        kinds += [kind] * blocks[-1].shape[0]
        rhs.append(np.asarray(data[key_b], dtype=float).ravel())
    A = SparseMatrix.from_scipy(sp.vstack(blocks))
    bounds = np.asarray(data["bounds"]).reshape(-1, 2)
    if bounds.shape[0] == 1:
        bounds = np.repeat(bounds, n, axis=0)
    lower = np.array([-np.inf if lo is None else float(lo) for lo in bounds[:, 0]])
    upper = np.array([np.inf if up is None else float(up) for up in bounds[:, 1]])
    m = A.nrows
    return RawLp(name, c, A, kinds, np.concatenate(rhs), lower, upper,
                 [f"R{i:05d}" for i in range(m)], [f"C{j:05d}" for j in range(n)])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("npz")
    ap.add_argument("out")
    ap.add_argument("--name", default=None)
    args = ap.parse_args(argv)
    name = args.name or args.out.split("/")[-1].split(".")[0].upper()
    raw = load_npz(args.npz, name)
    text = emit_mps(raw)
    back = parse_mps(text)
    assert np.array_equal(back.A.to_dense(), raw.A.to_dense())
    with gzip.open(args.out, "wt", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    print(f"{name}: {raw.A.nrows} rows, {raw.A.ncols} columns, {raw.A.nnz} nonzeros")


if __name__ == "__main__":
    main()
