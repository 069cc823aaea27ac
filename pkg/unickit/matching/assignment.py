"""
Exact linear assignment over a dense cost matrix.

The solver is the O(n^2 m) shortest augmenting path variant of the
Hungarian method with row/column potentials. For square problems the
potentials are reused to pick, among all optimal permutations, the
lexicographically smallest one: every optimal assignment uses only
edges with zero reduced cost, so the choice reduces to a lexicographic
perfect matching on that subgraph. Tight edges are first taken with
a relative tolerance, then exactly; a pick that costs more than the
plain Hungarian assignment is never returned.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    NumericError,
    ShapeMismatchError,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

# Reduced costs below TIGHT_RELATIVE * max(1, max|cost|) count as zero.
TIGHT_RELATIVE = 1e-10


def assignment_cost(
    cost: npt.NDArray[np.float64],
    sigma: Sequence[int],
) -> float:
    """Sum cost[i, sigma[i]] sequentially in row order."""
    total = 0.0
    for row, col in enumerate(sigma):
        total += float(cost[row, col])
    return total


def _check_cost(cost: npt.NDArray[np.float64]) -> None:
    if cost.ndim != 2:  # noqa: PLR2004
        msg = f"cost matrix must be 2-D, got shape {cost.shape}"
        raise ShapeMismatchError(msg)
    if not np.all(np.isfinite(cost)):
        rows, cols = np.nonzero(~np.isfinite(cost))
        msg = f"cost[{int(rows[0])}, {int(cols[0])}] is not finite"
        raise NumericError(msg)


def _shortest_augmenting_path(
    cost: npt.NDArray[np.float64],
) -> tuple[list[int], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Assign every row of an n x m matrix (n <= m) to a distinct column.

    Returns (row -> column, row potentials u, column potentials v) with
    cost[i, j] - u[i] - v[j] >= 0 and equality on assigned pairs.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # owner[j]: 1-based row assigned to 1-based column j; 0 = free
    owner = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)

    for row in range(1, n + 1):
        owner[0] = row
        j0 = 0
        min_reduced = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            free = ~used[1:]
            better = free & (reduced < min_reduced[1:])
            min_reduced[1:][better] = reduced[better]
            way[1:][better] = j0
            candidates = np.where(free, min_reduced[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            used_cols = np.nonzero(used)[0]
            u[owner[used_cols]] += delta
            v[used_cols] -= delta
            min_reduced[1:][free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0 != 0:
            j1 = int(way[j0])
            owner[j0] = owner[j1]
            j0 = j1

    row_to_col = [0] * n
    for col in range(1, m + 1):
        if owner[col] != 0:
            row_to_col[int(owner[col]) - 1] = col - 1
    return row_to_col, u[1:], v[1:]


def solve_rectangular(
    cost: npt.NDArray[np.float64],
) -> tuple[list[int], float]:
    """Optimal row -> column assignment for n <= m; returns (map, cost)."""
    cost = np.asarray(cost, dtype=np.float64)
    _check_cost(cost)
    n, m = cost.shape
    if n > m:
        msg = f"need rows <= columns, got {n} x {m}"
        raise ShapeMismatchError(msg)
    if n == 0:
        return [], 0.0
    row_to_col, _, _ = _shortest_augmenting_path(cost)
    return row_to_col, assignment_cost(cost, row_to_col)


def _reroute(  # noqa: PLR0913
    row: int,
    col: int,
    tight: list[list[int]],
    matching: list[int],
    owner: list[int],
    locked: list[bool],
) -> bool:
    """Give `col` to `row` by rotating an alternating cycle, if one exists."""
    start = owner[col]
    target = matching[row]
    came_from: dict[int, int] = {}
    stack = [start]
    while stack:
        current = stack.pop()
        for nxt in tight[current]:
            if locked[nxt] or nxt == col or nxt in came_from:
                continue
            came_from[nxt] = current
            if nxt == target:
                walk = nxt
                while True:
                    holder = came_from[walk]
                    previous = matching[holder]
                    matching[holder] = walk
                    owner[walk] = holder
                    if holder == start:
                        break
                    walk = previous
                matching[row] = col
                owner[col] = row
                return True
            stack.append(owner[nxt])
    return False


def _lexicographic_matching(
    tight: list[list[int]],
    matching: list[int],
) -> list[int]:
    n = len(matching)
    owner = [0] * n
    for r, c in enumerate(matching):
        owner[c] = r
    locked = [False] * n
    for row in range(n):
        for col in tight[row]:
            if locked[col]:
                continue
            if matching[row] == col:
                break
            if _reroute(row, col, tight, matching, owner, locked):
                break
        locked[matching[row]] = True
    return matching


def _tight_edges(
    reduced: npt.NDArray[np.float64],
    matching: list[int],
    tolerance: float,
) -> list[list[int]]:
    return [
        sorted(set(np.nonzero(reduced[r] <= tolerance)[0].tolist()) | {c})
        for r, c in enumerate(matching)
    ]


def solve_square(
    cost: npt.NDArray[np.float64],
) -> tuple[list[int], float]:
    """
    Minimum-cost permutation of an n x n matrix.

    Among equal-cost optima the lexicographically smallest permutation
    is returned. The cost is `assignment_cost` of that permutation.
    """
    cost = np.asarray(cost, dtype=np.float64)
    _check_cost(cost)
    n, m = cost.shape
    if n != m:
        msg = f"expected a square matrix, got {n} x {m}"
        raise ShapeMismatchError(msg)
    if n == 0:
        return [], 0.0
    matching, u, v = _shortest_augmenting_path(cost)
    optimum = assignment_cost(cost, matching)
    reduced = cost - u[:, None] - v[None, :]
    loose = TIGHT_RELATIVE * max(1.0, float(np.max(np.abs(cost))))
    # a loose tolerance may admit near-ties that cost more than the optimum
    for tolerance in (loose, 0.0):
        tight = _tight_edges(reduced, matching, tolerance)
        sigma = _lexicographic_matching(tight, list(matching))
        total = assignment_cost(cost, sigma)
        if total <= optimum:
            return sigma, total
    return matching, optimum
