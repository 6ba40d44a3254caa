"""Default cell-formation heuristic.

Works on a plain 0/1 array with no all-zero rows or columns and returns
positional cluster labels for rows (router cells) and columns (agent
families). Pipeline:

1. canonical starting order from colour refinement of the bipartite graph,
   so the result does not depend on the input row/column order;
2. rank-order sorting (rows, then columns, by their binary value) to a fixed
   point;
3. diagonal block cuts on that order, placed where grouping efficacy is
   maximal (Dinkelbach iteration over an exact dynamic program);
4. more seeds from average-linkage clustering of agent columns (Jaccard);
5. every seed is refined by alternating majority assignment, and the best
   fixed point by efficacy wins.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

_NEG = -(2**62)


def efficacy_of(a: np.ndarray, rl: np.ndarray, al: np.ndarray) -> Fraction:
    inside = rl[:, None] == al[None, :]
    e = int(a.sum())
    e_in = int((a * inside).sum())
    voids = int(inside.sum()) - e_in
    return Fraction(e_in, e + voids)


def _refine_colours(a: np.ndarray) -> tuple[list[int], list[int]]:
    n, m = a.shape
    rc = [0] * n
    cc = [0] * m
    rows_nz = [np.flatnonzero(a[i]) for i in range(n)]
    cols_nz = [np.flatnonzero(a[:, j]) for j in range(m)]
    for _ in range(n + m + 1):
        rsig = [(rc[i], tuple(sorted(cc[j] for j in rows_nz[i]))) for i in range(n)]
        csig = [(cc[j], tuple(sorted(rc[i] for i in cols_nz[j]))) for j in range(m)]
        rank_r = {s: k for k, s in enumerate(sorted(set(rsig)))}
        rank_c = {s: k for k, s in enumerate(sorted(set(csig)))}
        nrc = [rank_r[s] for s in rsig]
        ncc = [rank_c[s] for s in csig]
        stable = len(rank_r) == len(set(rc)) and len(rank_c) == len(set(cc))
        rc, cc = nrc, ncc
        if stable:
            break
    return rc, cc


def canonical_order(a: np.ndarray) -> tuple[list[int], list[int]]:
    """Row and column orders that depend only on the bipartite structure
    (up to colour-equivalent items, which fall back to position)."""
    rc, cc = _refine_colours(a)
    row_sums = a.sum(axis=1)
    col_sums = a.sum(axis=0)
    rows = sorted(range(a.shape[0]), key=lambda i: (-row_sums[i], rc[i], i))
    cols = sorted(range(a.shape[1]), key=lambda j: (-col_sums[j], cc[j], j))
    return rows, cols


def rank_order(a: np.ndarray, rows: list[int], cols: list[int], max_iter: int = 1000) -> tuple[list[int], list[int]]:
    """Alternate binary-rank sorting of rows and columns until nothing moves.

    Equal ranks only occur for identical rows (columns); they keep their
    current relative order.
    """
    for _ in range(max_iter):
        sub = a[np.ix_(rows, cols)]
        keys = [tuple(-int(v) for v in sub[k]) for k in range(len(rows))]
        new_rows = [rows[k] for k in sorted(range(len(rows)), key=lambda k: (keys[k], k))]
        sub = a[np.ix_(new_rows, cols)]
        keys = [tuple(-int(v) for v in sub[:, k]) for k in range(len(cols))]
        new_cols = [cols[k] for k in sorted(range(len(cols)), key=lambda k: (keys[k], k))]
        if new_rows == rows and new_cols == cols:
            break
        rows, cols = new_rows, new_cols
    return rows, cols


def _fill_layer(pre: np.ndarray, prev: np.ndarray, cur: np.ndarray, back: np.ndarray, p: int, q: int) -> None:
    """cur[i, j] = max over i0 < i, j0 < j of prev[i0, j0] + block value.

    ``prev`` may be ``cur`` itself (unbounded block count): entries are
    filled in increasing (i, j) order, so dependencies are always ready.
    """
    n, m = pre.shape[0] - 1, pre.shape[1] - 1
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = prev[:i, :j]
            ones = pre[i, j] - pre[:i, j][:, None] - pre[i, :j][None, :] + pre[:i, :j]
            area = (i - np.arange(i))[:, None] * (j - np.arange(j))[None, :]
            val = np.where(sub > _NEG, sub + (q + p) * ones - p * area, _NEG)
            flat = int(np.argmax(val))
            if val.flat[flat] > _NEG:
                cur[i, j] = val.flat[flat]
                back[i, j] = divmod(flat, j)


def _best_blocks(s: np.ndarray, p: int, q: int, n_blocks: int | None):
    """Contiguous diagonal blocks of the ordered array ``s`` maximising
    the sum over blocks of (q+p)*ones - p*area."""
    n, m = s.shape
    pre = np.zeros((n + 1, m + 1), dtype=np.int64)
    pre[1:, 1:] = s.cumsum(axis=0).cumsum(axis=1)
    layers = 1 if n_blocks is None else n_blocks
    best = np.full((layers + 1, n + 1, m + 1), _NEG, dtype=np.int64)
    back = np.full((layers + 1, n + 1, m + 1, 2), -1, dtype=np.int64)
    best[0, 0, 0] = 0
    if n_blocks is None:
        best[1, 0, 0] = 0
    if n_blocks is None:
        _fill_layer(pre, best[1], best[1], back[1], p, q)
    else:
        for k in range(1, n_blocks + 1):
            _fill_layer(pre, best[k - 1], best[k], back[k], p, q)
    if best[layers, n, m] == _NEG:
        return None
    blocks = []
    layer, i, j = layers, n, m
    while (i, j) != (0, 0):
        i0, j0 = (int(v) for v in back[layer, i, j])
        blocks.append((i0, i, j0, j))
        i, j = i0, j0
        if n_blocks is not None:
            layer -= 1
    blocks.reverse()
    return blocks


def block_cuts(a: np.ndarray, rows: list[int], cols: list[int], n_blocks: int | None = None):
    """Split the ordered matrix into diagonal blocks of maximal efficacy.

    Returns ``(row_labels, col_labels)`` or ``None`` when ``n_blocks``
    exceeds what the shape allows.
    """
    s = a[np.ix_(rows, cols)]
    e = int(s.sum())
    lam = Fraction(0)
    while True:
        blocks = _best_blocks(s, lam.numerator, lam.denominator, n_blocks)
        if blocks is None:
            return None
        e_in = sum(int(s[i0:i1, j0:j1].sum()) for i0, i1, j0, j1 in blocks)
        area = sum((i1 - i0) * (j1 - j0) for i0, i1, j0, j1 in blocks)
        new = Fraction(e_in, e + area - e_in)
        if new <= lam:
            break
        lam = new
    rl = np.empty(a.shape[0], dtype=np.int64)
    al = np.empty(a.shape[1], dtype=np.int64)
    for k, (i0, i1, j0, j1) in enumerate(blocks):
        rl[rows[i0:i1]] = k
        al[cols[j0:j1]] = k
    return rl, al


def relabel(a: np.ndarray, rl: np.ndarray, al: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop empty clusters and renumber: larger family first, then more
    in-block ones, then the old label."""
    labels = sorted(set(rl.tolist()) | set(al.tolist()))
    fam = {c: int((al == c).sum()) for c in labels}
    ones = {c: int(a[np.ix_(rl == c, al == c)].sum()) for c in labels}
    order = sorted(labels, key=lambda c: (-fam[c], -ones[c], c))
    mapping = np.full(max(labels) + 1, -1, dtype=np.int64)
    for new, old in enumerate(order):
        mapping[old] = new
    return mapping[rl], mapping[al]


def _onehot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.size, k), dtype=np.int64)
    out[np.arange(labels.size), labels] = 1
    return out


def refine_majority(a: np.ndarray, rl: np.ndarray, al: np.ndarray, max_iter: int = 100):
    """Routers join the family holding most of their ones, then agents join
    the cell holding most of theirs; ties go to the lower label. Repeats to
    a fixed point. On a cycle, the best state of the cycle is kept."""
    seen: dict = {}
    history = []
    for _ in range(max_iter):
        rl, al = relabel(a, rl, al)
        state = (tuple(rl.tolist()), tuple(al.tolist()))
        if state in seen:
            cycle = history[seen[state]:]
            return max(cycle, key=lambda s: efficacy_of(a, s[0], s[1]))
        seen[state] = len(history)
        history.append((rl, al))
        k = int(max(rl.max(), al.max())) + 1
        new_rl = np.argmax(a @ _onehot(al, k), axis=1)
        new_al = np.argmax(a.T @ _onehot(new_rl, k), axis=1)
        if np.array_equal(new_rl, rl) and np.array_equal(new_al, al):
            return rl, al
        rl, al = new_rl, new_al
    return relabel(a, rl, al)


def agent_linkage_seeds(a: np.ndarray, cols: list[int], ks) -> list[np.ndarray]:
    """Agent labels from average-linkage clustering of columns (Jaccard),
    cut at each requested cluster count."""
    m = a.shape[1]
    if m == 1:
        return [np.zeros(1, dtype=np.int64) for _ in ks]
    z = linkage(pdist(a[:, cols].T.astype(bool), metric="jaccard"), method="average")
    seeds = []
    for k in ks:
        lab = fcluster(z, k, criterion="maxclust") - 1
        al = np.empty(m, dtype=np.int64)
        al[cols] = lab
        seeds.append(al)
    return seeds


def cluster_dca(a: np.ndarray, n_clusters: int | None = None, max_iter: int = 100):
    """Best majority fixed point over all seeds.

    Returns ``(row_labels, col_labels, exact)`` where ``exact`` says whether
    the requested cluster count was met (always True when none requested).
    """
    rows, cols = canonical_order(a)
    rows, cols = rank_order(a, rows, cols)
    seeds = []
    cut = block_cuts(a, rows, cols, n_clusters)
    if cut is not None:
        seeds.append(cut)
    ks = range(1, min(a.shape) + 1) if n_clusters is None else [n_clusters]
    for al in agent_linkage_seeds(a, cols, ks):
        k = int(al.max()) + 1
        rl = np.argmax(a @ _onehot(al, k), axis=1)
        seeds.append((rl, al))

    results = [refine_majority(a, rl, al, max_iter) for rl, al in seeds]
    exact = True
    if n_clusters is not None:
        matching = [r for r in results if int(r[0].max()) + 1 == n_clusters]
        if not matching:
            # No fixed point of that size: keep the cells of seeds that have
            # exactly n_clusters of them and give each agent its majority cell.
            for rl, _ in seeds:
                if len(set(rl.tolist())) == n_clusters:
                    rl = np.unique(rl, return_inverse=True)[1].reshape(-1)
                    al = np.argmax(a.T @ _onehot(rl, n_clusters), axis=1)
                    matching.append((rl, al))
        if matching:
            results = matching
        else:
            exact = False
    best = None
    best_eff = Fraction(-1)
    for rl, al in results:
        eff = efficacy_of(a, rl, al)
        if eff > best_eff:
            best, best_eff = (rl, al), eff
    return best[0], best[1], exact
