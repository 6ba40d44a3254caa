"""Multi-criteria clustering of agents by weighted Euclidean distance.

Each agent is a vector of criterion values; ``k`` holds one non-negative
importance weight per criterion. Distance is
``sqrt(sum_i k_i * (x_i - c_i) ** 2)`` and an agent belongs to the nearest
center, exact ties going to the lowest center index.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InputError
from .ids import Id, parse_id


def _vector(values, what: str) -> tuple[float, ...]:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise InputError(f"{what} must be a sequence of numbers") from None
    if not out:
        raise InputError(f"{what} must have at least one criterion")
    if not all(math.isfinite(v) for v in out):
        raise InputError(f"{what} contains a non-finite value")
    return out


def check_weights(k) -> tuple[float, ...]:
    k = _vector(k, "criterion weights")
    if any(w < 0 for w in k):
        raise InputError("criterion weights must be non-negative")
    if not any(w > 0 for w in k):
        raise InputError("at least one criterion weight must be positive")
    return k


def squared_distance(x, c, k) -> float:
    """Weighted squared distance with an exactly-rounded sum."""
    if not (len(x) == len(c) == len(k)):
        raise InputError(f"dimension mismatch: point {len(x)}, center {len(c)}, weights {len(k)}")
    return math.fsum(w * (a - b) ** 2 for w, a, b in zip(k, x, c))


def weighted_distance(x: Sequence[float], c: Sequence[float], k: Sequence[float]) -> float:
    x = _vector(x, "feature vector")
    c = _vector(c, "cluster center")
    k = check_weights(k)
    if not (len(x) == len(c) == len(k)):
        raise InputError(f"dimension mismatch: point {len(x)}, center {len(c)}, weights {len(k)}")
    # hypot rescales, so tiny differences do not underflow to zero
    return math.hypot(*(math.sqrt(w) * (a - b) for w, a, b in zip(k, x, c)))


def _nearest(x, centers, k) -> int:
    best, best_d = 0, squared_distance(x, centers[0], k)
    for r in range(1, len(centers)):
        d = squared_distance(x, centers[r], k)
        if d < best_d:
            best, best_d = r, d
    return best


def assign(x: Sequence[float], centers: Sequence[Sequence[float]], k: Sequence[float]) -> int:
    """0-based index of the nearest center; exact ties go to the lowest index."""
    if len(centers) == 0:
        raise InputError("cannot assign to an empty list of centers")
    x = _vector(x, "feature vector")
    centers = [_vector(c, "cluster center") for c in centers]
    return _nearest(x, centers, check_weights(k))


@dataclass
class FeatureClustering:
    centers: list[tuple[float, ...]]
    assignment: list[int]
    iterations: int
    converged: bool
    ssq_history: list[float] = field(default_factory=list)

    @property
    def members(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.centers]
        for i, r in enumerate(self.assignment):
            out[r].append(i)
        return out

    @property
    def ssq(self) -> float:
        return self.ssq_history[-1]


def _mean(points, idx) -> tuple[float, ...]:
    dim = len(points[0])
    return tuple(math.fsum(points[i][d] for i in idx) / len(idx) for d in range(dim))


def _ssq(points, centers, assignment, k) -> float:
    return math.fsum(squared_distance(p, centers[r], k) for p, r in zip(points, assignment))


def farthest_point_seeds(points, n_clusters: int, k) -> list[int]:
    """Start from point 0, then repeatedly add the point farthest from the
    chosen seeds (lowest index on ties)."""
    seeds = [0]
    nearest = [squared_distance(p, points[0], k) for p in points]
    while len(seeds) < n_clusters:
        nxt = max(range(len(points)), key=lambda i: (nearest[i], -i) if i not in seeds else (-1.0, 0))
        seeds.append(nxt)
        for i, p in enumerate(points):
            nearest[i] = min(nearest[i], squared_distance(p, points[nxt], k))
    return seeds


def cluster_features(
    points: Sequence[Sequence[float]],
    n_clusters: int,
    k: Sequence[float] | None = None,
    max_iter: int = 100,
) -> FeatureClustering:
    """Lloyd iteration under the weighted distance.

    Deterministic: farthest-point seeding, lowest-index tie breaking, and an
    empty cluster takes the point farthest from its center among clusters
    that can spare one.
    """
    if len(points) == 0:
        raise InputError("no points to cluster")
    pts = [_vector(p, f"point {i}") for i, p in enumerate(points)]
    dim = len(pts[0])
    if any(len(p) != dim for p in pts):
        raise InputError("all points must have the same number of criteria")
    k = check_weights([1.0] * dim if k is None else k)
    if len(k) != dim:
        raise InputError(f"{len(k)} weights given for {dim} criteria")
    if not 1 <= n_clusters <= len(pts):
        raise InputError(f"cluster count must lie in [1, {len(pts)}], got {n_clusters}")
    if max_iter < 1:
        raise InputError("max_iter must be >= 1")

    centers = [pts[i] for i in farthest_point_seeds(pts, n_clusters, k)]
    assignment: list[int] | None = None
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = [_nearest(p, centers, k) for p in pts]
        _fill_empty(pts, centers, new, k)
        if new == assignment:
            converged = True
            break
        assignment = new
        history.append(_ssq(pts, centers, assignment, k))
        centers = [_mean(pts, [i for i, r in enumerate(assignment) if r == c]) for c in range(n_clusters)]
        history.append(_ssq(pts, centers, assignment, k))
    return FeatureClustering(centers, assignment, it, converged, history)


def _fill_empty(pts, centers, assignment, k) -> None:
    for c in range(len(centers)):
        if c in assignment:
            continue
        sizes = [assignment.count(r) for r in range(len(centers))]
        donors = [i for i, r in enumerate(assignment) if sizes[r] > 1]
        far = max(donors, key=lambda i: (squared_distance(pts[i], centers[assignment[i]], k), -i))
        assignment[far] = c
        centers[c] = pts[far]


@dataclass(frozen=True)
class FeatureTable:
    agents: tuple[Id, ...]
    criteria: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]


def parse_features_csv(text: str, source: str = "<features>") -> FeatureTable:
    rows = [(n, r) for n, r in enumerate(csv.reader(io.StringIO(text)), start=1) if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{source}: empty feature file")
    line, header = rows[0]
    if header[0].strip().lower() != "agent" or len(header) < 2:
        raise InputError(f"{source}:{line}: header must be 'agent,<criterion names...>'")
    agents, values = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"{source}:{line}: expected {len(header)} fields, got {len(row)}")
        try:
            agents.append(parse_id(row[0]))
            vals = tuple(float(c) for c in row[1:])
        except ValueError:
            raise InputError(f"{source}:{line}: malformed row {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"{source}:{line}: non-finite criterion value")
        values.append(vals)
    if len(set(agents)) != len(agents):
        raise InputError(f"{source}: duplicate agent ids")
    return FeatureTable(tuple(agents), tuple(h.strip() for h in header[1:]), tuple(values))


def read_features_csv(path: str | Path) -> FeatureTable:
    path = Path(path)
    try:
        return parse_features_csv(path.read_text(), str(path))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def parse_weights(text: str) -> tuple[float, ...]:
    """Weights from ``"1,2,0.5"`` (a flag value or a one-line CSV file)."""
    fields = [f for f in text.strip().replace("\n", ",").split(",") if f.strip()]
    try:
        return check_weights(float(f) for f in fields)
    except InputError:
        raise
    except ValueError:
        raise InputError(f"malformed weights {text.strip()!r}") from None
