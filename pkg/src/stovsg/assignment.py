"""Minimum-cost linear assignment with deterministic tie-breaking.

The solver is the classic Hungarian algorithm with row/column potentials
(O(n^3)).  Rectangular inputs are padded to square with a dummy cost
strictly above every real entry, so exactly ``min(rows, cols)`` real pairs
come back.  Because several assignments can share the optimal total, the
result is then canonicalized: complementary slackness says every optimal
assignment uses only *tight* edges (zero reduced cost under the final
potentials), and among the perfect matchings of that tight-edge graph we
return the lexicographically smallest one (lowest row index first, then
lowest column index).
"""

from __future__ import annotations

import numpy as np

from .errors import InputRejected


def _hungarian_square(a: np.ndarray) -> tuple[list[int], list[float], list[float]]:
    """Potentials-based Hungarian on a square matrix.

    Returns (col_of_row, u, v) where ``u``/``v`` are dual potentials with
    ``a[i, j] - u[i] - v[j] >= 0`` (up to float noise) for all cells and
    equality on matched cells.
    """
    n = a.shape[0]
    INF = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = 1-based row matched to column j; p[0] is scratch
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u[1:], v[1:]


def _lex_min_perfect_matching(adj: list[list[int]], initial: list[int]) -> list[int]:
    """Lexicographically smallest perfect matching of a bipartite graph.

    ``adj[i]`` lists row i's columns in ascending order and ``initial`` is
    any perfect matching.  Rows are fixed in order; for each row the
    smallest column that still leaves the remaining rows matchable wins.
    """
    n = len(adj)
    row_to_col = list(initial)
    col_to_row = [0] * n
    for i, j in enumerate(row_to_col):
        col_to_row[j] = i
    fixed_cols: set[int] = set()

    def try_augment(r: int, banned: set[int]) -> bool:
        for j in adj[r]:
            if j in fixed_cols or j in banned:
                continue
            banned.add(j)
            owner = col_to_row[j]
            if owner == -1 or try_augment(owner, banned):
                row_to_col[r] = j
                col_to_row[j] = r
                return True
        return False

    for i in range(n):
        for j in adj[i]:
            if j in fixed_cols:
                continue
            if j == row_to_col[i]:
                break  # already the smallest feasible column
            owner = col_to_row[j]
            saved = (list(row_to_col), list(col_to_row))
            col_to_row[row_to_col[i]] = -1
            row_to_col[i] = j
            col_to_row[j] = i
            row_to_col[owner] = -1
            if try_augment(owner, {j}):
                break
            row_to_col, col_to_row = saved  # infeasible, try next column
        fixed_cols.add(row_to_col[i])
    return row_to_col


def min_cost_assignment(cost: np.ndarray) -> list[tuple[int, int]]:
    """Solve the rectangular assignment problem.

    Returns ``min(rows, cols)`` disjoint (row, col) pairs of minimum total
    cost, sorted by row; among equal-cost optima the lexicographically
    smallest pair sequence is returned.  Empty matrices yield ``[]``.
    """
    a = np.asarray(cost, dtype=np.float64)
    if a.ndim != 2:
        raise InputRejected(f"cost matrix must be 2-D, got shape {a.shape}")
    r, c = a.shape
    if r == 0 or c == 0:
        return []
    if not np.isfinite(a).all():
        raise InputRejected("cost matrix contains non-finite entries")

    n = max(r, c)
    pad = float(a.max()) + 1.0
    sq = np.full((n, n), pad, dtype=np.float64)
    sq[:r, :c] = a

    col_of_row, u, v = _hungarian_square(sq)

    # Edges with zero reduced cost carry every optimal assignment.
    tol = 1e-9 * (1.0 + float(np.abs(sq).max()))
    reduced = sq - np.asarray(u)[:, None] - np.asarray(v)[None, :]
    adj = [list(np.nonzero(reduced[i] <= tol)[0]) for i in range(n)]
    col_of_row = _lex_min_perfect_matching(adj, col_of_row)

    return [(i, col_of_row[i]) for i in range(r) if col_of_row[i] < c]
