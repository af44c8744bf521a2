"""Fill-reducing ordering by minimum degree on the quotient graph."""
from __future__ import annotations

import heapq

import numpy as np

from .errors import DimensionError
from .sparse import Permutation, SparseMatrix


def _adjacency(pattern: SparseMatrix):
    if pattern.nrows != pattern.ncols:
        raise DimensionError("ordering needs a square pattern")
    n = pattern.nrows
    adj = [set() for _ in range(n)]
    cols = np.repeat(np.arange(n), pattern.col_counts())
    for i, j in zip(pattern.row_idx.tolist(), cols.tolist()):
        if i != j:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def min_degree_order(pattern: SparseMatrix) -> Permutation:
    """Minimum degree ordering of a structurally symmetric pattern.

    Either triangle (or both) of the pattern may be stored.  Eliminated
    nodes become elements of a quotient graph and the degree of a variable
    is the approximate external degree bound used by AMD::

        d_i <= |A_i| + |L_p \\ i| + sum_{e != p} |L_e \\ L_p|

    clipped by the number of remaining variables.  Variables whose only
    remaining connection is the newest element are indistinguishable; they
    are merged into one supervariable and later eliminated together (mass
    elimination), which keeps dense cliques cheap.  Ties are broken by the
    lowest original index, so the result is deterministic.

    Returns
    -------
    Permutation
        ``perm[k]`` is the node eliminated at step ``k``.
    """
    adj = _adjacency(pattern)
    n = len(adj)
    weight = [1] * n
    group = [[i] for i in range(n)]       # members of each supervariable
    elems = [set() for _ in range(n)]     # elements adjacent to each variable
    members: dict[int, set] = {}          # supervariables of each live element
    size: dict[int, int] = {}             # weighted size of each element
    degree = [len(a) for a in adj]
    heap = [(degree[i], i) for i in range(n)]
    heapq.heapify(heap)
    done = [False] * n
    order = []
    remaining = n
    ext = {}
    while heap:
        deg, p = heapq.heappop(heap)
        if done[p] or deg != degree[p]:
            continue
        done[p] = True
        order.extend(sorted(group[p]))
        remaining -= weight[p]

        lp = set(adj[p])
        absorbed = elems[p]
        for e in absorbed:
            lp |= members.pop(e)
            del size[e]
        lp.discard(p)
        adj[p] = set()
        elems[p] = set()

        # |L_e \ L_p| (weighted) for every element touching the new element
        ext.clear()
        lp_size = 0
        for j in lp:
            wj = weight[j]
            lp_size += wj
            for e in elems[j]:
                if e in absorbed:
                    continue
                if e not in ext:
                    ext[e] = size[e]
                ext[e] -= wj
        plain = []
        for j in lp:
            ej = elems[j]
            if absorbed:
                ej -= absorbed
            ej.add(p)
            aj = adj[j]
            aj.discard(p)
            if aj:
                if len(aj) < len(lp):
                    adj[j] = aj = {v for v in aj if v not in lp}
                else:
                    aj.difference_update(lp)
            if not aj and len(ej) == 1:
                plain.append(j)
        # variables attached only to p are indistinguishable: merge them
        if len(plain) > 1:
            plain.sort()
            rep = plain[0]
            for j in plain[1:]:
                weight[rep] += weight[j]
                group[rep].extend(group[j])
                group[j] = []
                done[j] = True
                elems[j] = set()
                lp.discard(j)
        members[p] = lp
        size[p] = lp_size
        for j in lp:
            wj = weight[j]
            approx = sum(weight[v] for v in adj[j]) + lp_size - wj
            for e in elems[j]:
                if e != p:
                    approx += ext.get(e, size[e])
            new_deg = min(remaining - wj, degree[j] + lp_size - wj, approx)
            if new_deg != degree[j]:
                degree[j] = new_deg
                heapq.heappush(heap, (new_deg, j))
    return Permutation.from_order(order)
