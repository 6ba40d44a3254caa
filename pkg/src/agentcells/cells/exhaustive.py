"""Exact efficacy maximisation for small matrices.

Router cells are enumerated as set partitions (restricted growth strings).
For a fixed set of cells the best agent assignment is found with Dinkelbach's
method: for a trial ratio p/q each agent independently picks the cell
maximising (q+p)*hits - p*cell_size, which is exact for ratio objectives.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator

import numpy as np

DEFAULT_ROW_LIMIT = 9


def set_partitions(n: int, k_max: int | None = None) -> Iterator[list[int]]:
    """Restricted growth strings of length ``n`` with at most ``k_max`` blocks."""
    k_max = n if k_max is None else k_max
    if n == 0:
        yield []
        return
    labels = [0] * n

    def rec(pos: int, used: int):
        if pos == n:
            yield list(labels)
            return
        for c in range(min(used + 1, k_max)):
            labels[pos] = c
            yield from rec(pos + 1, max(used, c + 1))

    yield from rec(1, 1)


def best_agent_assignment(a: np.ndarray, rl: np.ndarray, k: int) -> tuple[np.ndarray, Fraction]:
    hits = a.T @ np.eye(k, dtype=np.int64)[rl]  # agents x cells
    sizes = np.bincount(rl, minlength=k)
    e = int(a.sum())
    agents = np.arange(a.shape[1])
    lam = Fraction(0)
    while True:
        p, q = lam.numerator, lam.denominator
        al = np.argmax((q + p) * hits - p * sizes[None, :], axis=1)
        e_in = int(hits[agents, al].sum())
        voids = int(sizes[al].sum()) - e_in
        new = Fraction(e_in, e + voids)
        if new <= lam:
            return al, lam
        lam = new


def cluster_exhaustive(a: np.ndarray, n_clusters: int | None = None, row_limit: int = DEFAULT_ROW_LIMIT):
    """Globally efficacy-optimal ``(row_labels, col_labels, efficacy)``.

    Ties keep the first partition in enumeration order.
    """
    n = a.shape[0]
    if n > row_limit:
        raise ValueError(f"exhaustive mode supports at most {row_limit} nonzero routers, got {n}")
    best = None
    best_eff = Fraction(-1)
    for labels in set_partitions(n, n_clusters):
        k = max(labels) + 1
        if n_clusters is not None and k != n_clusters:
            continue
        rl = np.array(labels, dtype=np.int64)
        al, eff = best_agent_assignment(a, rl, k)
        if eff > best_eff:
            best, best_eff = (rl, al), eff
    if best is None:
        raise ValueError(f"no partition into exactly {n_clusters} router cells")
    return best[0], best[1], best_eff
