"""Edge detection, labeled cell grids, and metric-based segmentation.

Edges are local maxima of a gradient-magnitude field.  The cell grid
aggregates a magnitude field into coarse cells with per-cell summary
features and ground-truth labels taken from annotated boundary offsets.
Segmentation clusters grid points under a Hellinger + weighted space-time
distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .calculus import ScalarField
from .field import SpaceTimeField

_NEIGHBOR_OFFSETS = [
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
]


@dataclass(frozen=True)
class EdgeMap:
    flags: np.ndarray  # (S, T) booleans

    @property
    def grid_s(self) -> int:
        return self.flags.shape[0]

    @property
    def grid_t(self) -> int:
        return self.flags.shape[1]

    def points(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.flags)]


def detect_edges(magnitude: ScalarField, relative_threshold: float = 0.2) -> EdgeMap:
    """Flag points that are >= all 8 neighbors, > at least one of them, and
    >= relative_threshold times the global maximum.

    Adjacent equal-valued candidates keep only the lexicographically
    smallest (s, t) index, so a plateau never yields multiple flags, and a
    constant field yields none (no strictly smaller neighbor exists).
    """
    if not 0.0 <= relative_threshold <= 1.0:
        raise ValueError("relative_threshold outside [0, 1]")
    v = magnitude.values
    S, T = v.shape
    lo = np.full((S + 2, T + 2), -np.inf)
    hi = np.full((S + 2, T + 2), np.inf)
    lo[1:-1, 1:-1] = v
    hi[1:-1, 1:-1] = v
    ge_all = np.ones((S, T), dtype=bool)
    gt_any = np.zeros((S, T), dtype=bool)
    for di, dj in _NEIGHBOR_OFFSETS:
        # -inf padding exempts missing neighbors from the >= check; +inf
        # padding keeps them from satisfying the strict > check
        ge_all &= v >= lo[1 + di : S + 1 + di, 1 + dj : T + 1 + dj]
        gt_any |= v > hi[1 + di : S + 1 + di, 1 + dj : T + 1 + dj]
    candidates = ge_all & gt_any & (v >= relative_threshold * v.max())
    flags = np.zeros((S, T), dtype=bool)
    kept: dict[tuple[int, int], float] = {}
    for i, j in np.argwhere(candidates):  # argwhere is lexicographic already
        val = v[i, j]
        tied = any(
            kept.get((i + di, j + dj)) == val for di, dj in _NEIGHBOR_OFFSETS
        )
        if not tied:
            flags[i, j] = True
            kept[(int(i), int(j))] = float(val)
    return EdgeMap(flags)


def boundary_spacetime_points(
    boundaries: list[list[int]],
    revision_lengths: list[int],
    mode: str = "normalized",
) -> list[tuple[float, float]]:
    """Map per-revision token-offset boundaries to (s, t) domain coordinates.

    Normalized mode scales offset b of revision j to b/N(j); non-normalized
    keeps the absolute offset.  Time coordinate is the revision index.
    """
    pts = []
    for j, offs in enumerate(boundaries):
        n = revision_lengths[j]
        for b in offs:
            if mode == "normalized":
                if n == 0:
                    continue
                pts.append((b / n, float(j)))
            else:
                pts.append((float(b), float(j)))
    return pts


def _cell_of(coord: float, extent: float, cells: int) -> int:
    if extent <= 0.0:
        return 0
    return min(cells - 1, int(np.floor(coord / extent * cells)))


_CELL_STATS = ("min", "max", "mean", "median")


def _stats(vals: np.ndarray) -> np.ndarray:
    if vals.size == 0:
        return np.zeros(4)
    return np.array(
        [vals.min(), vals.max(), vals.mean(), np.median(vals)]
    )


@dataclass(frozen=True)
class CellGrid:
    """Coarse partition of the grid with labels from annotations only.

    features[a, b] concatenates (min, max, mean, median) of the magnitude
    values over the 3x3 cell neighborhood of (a, b) in row-major
    neighborhood order, borders replicated: 36 values per cell.
    """

    cells_s: int
    cells_t: int
    labels: np.ndarray  # (cells_s, cells_t) bool
    features: np.ndarray  # (cells_s, cells_t, 36)

    def feature_matrix(self) -> np.ndarray:
        return self.features.reshape(self.cells_s * self.cells_t, -1)

    def label_vector(self) -> np.ndarray:
        return self.labels.reshape(-1)


def cells_of_boundaries(
    points: list[tuple[float, float]],
    extent: tuple[float, float],
    cells: tuple[int, int],
) -> set[tuple[int, int]]:
    I, J = extent
    A, B = cells
    return {(_cell_of(s, I, A), _cell_of(t, J, B)) for s, t in points}


def build_cell_grid(
    edge_ground_truth: list[list[int]],
    magnitude: ScalarField,
    cells: tuple[int, int] = (20, 20),
    revision_lengths: list[int] | None = None,
    mode: str = "normalized",
) -> CellGrid:
    """Label cells by ground-truth boundaries and attach magnitude statistics.

    edge_ground_truth holds per-revision boundary token offsets; in
    normalized mode revision_lengths is required to scale them.
    """
    A, B = cells
    if A < 1 or B < 1:
        raise ValueError("cell grid must be at least 1x1")
    if mode == "normalized" and revision_lengths is None:
        raise ValueError("normalized mode requires revision_lengths")
    I, J = magnitude.extent
    S, T = magnitude.grid_s, magnitude.grid_t
    s_coords, t_coords = magnitude.coords()

    labels = np.zeros((A, B), dtype=bool)
    pts = boundary_spacetime_points(
        edge_ground_truth, revision_lengths or [0] * len(edge_ground_truth), mode
    )
    for ca, cb in cells_of_boundaries(pts, (I, J), (A, B)):
        labels[ca, cb] = True

    cell_s = np.array([_cell_of(c, I, A) for c in s_coords])
    cell_t = np.array([_cell_of(c, J, B) for c in t_coords])
    cell_stats = np.zeros((A, B, 4))
    for a in range(A):
        smask = cell_s == a
        for b in range(B):
            vals = magnitude.values[np.ix_(smask, cell_t == b)].ravel()
            cell_stats[a, b] = _stats(vals)

    features = np.zeros((A, B, 36))
    for a in range(A):
        for b in range(B):
            parts = []
            for da in (-1, 0, 1):
                for db in (-1, 0, 1):
                    na = min(max(a + da, 0), A - 1)
                    nb = min(max(b + db, 0), B - 1)
                    parts.append(cell_stats[na, nb])
            features[a, b] = np.concatenate(parts)
    return CellGrid(A, B, labels, features)


# --- metrics -----------------------------------------------------------


def _as_dense(u, size: int | None = None) -> np.ndarray:
    if isinstance(u, dict):
        n = size if size is not None else (max(u) if u else 1)
        arr = np.zeros(n)
        for k, val in u.items():
            arr[k - 1] = val
        return arr
    return np.asarray(u, dtype=float)


def hellinger(u, v) -> float:
    """sqrt of sum_i (sqrt(u_i) - sqrt(v_i))^2 over aligned components.

    Accepts dense vectors or {1-based id: value} dicts.  Range [0, sqrt(2)]
    for (sub-)distributions.
    """
    if isinstance(u, dict) or isinstance(v, dict):
        size = 0
        for d in (u, v):
            if isinstance(d, dict):
                size = max(size, max(d, default=0))
            else:
                size = max(size, len(d))
        u, v = _as_dense(u, size), _as_dense(v, size)
    else:
        u, v = _as_dense(u), _as_dense(v)
        if u.shape != v.shape:
            raise ValueError("distribution length mismatch")
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("negative component in distribution")
    d = np.sqrt(u) - np.sqrt(v)
    return float(np.sqrt(np.dot(d, d)))


def spacetime_distance(p1, p2, c1: float, c2: float) -> float:
    """hellinger(dist1, dist2) + sqrt(c1 (s1-s2)^2 + c2 (t1-t2)^2)."""
    if c1 < 0 or c2 < 0:
        raise ValueError("c1 and c2 must be nonnegative")
    s1, t1, u = p1
    s2, t2, v = p2
    return hellinger(u, v) + float(
        np.sqrt(c1 * (s1 - s2) ** 2 + c2 * (t1 - t2) ** 2)
    )


# --- segmentation ------------------------------------------------------


@dataclass(frozen=True)
class Segmentation:
    k: int
    assignment: np.ndarray  # (S, T) ints in [0, k)
    weights: tuple[float, float]
    objective: float
    method: str
    iterations: int
    objective_trajectory: tuple[float, ...] = dc_field(default=())


_WEIGHT_SCALE = 0.05


def default_weights(extent: tuple[float, float]) -> tuple[float, float]:
    """c1 = 0.05/I^2, c2 = 0.05/J^2: a mild spatial-coherence pull.

    The 0.05 factor keeps the space-time term well below the Hellinger
    term (which spans [0, sqrt(2)]); equal scaling lets position dominate
    and splits the domain geometrically instead of by content.  A
    zero-extent axis contributes no distance, so its weight is 0.
    """
    I, J = extent
    return (
        _WEIGHT_SCALE / (I * I) if I > 0 else 0.0,
        _WEIGHT_SCALE / (J * J) if J > 0 else 0.0,
    )


def _embed(field: SpaceTimeField, c1: float, c2: float) -> np.ndarray:
    gamma = field.data.copy()
    gamma.data = np.sqrt(gamma.data)
    S, T = field.grid_s, field.grid_t
    ss = np.tile(field.s_coords, T) * np.sqrt(c1)
    tt = np.repeat(field.t_coords, S) * np.sqrt(c2)
    return np.hstack([np.asarray(gamma.todense()), ss[:, None], tt[:, None]])


def _sq_dists(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * X @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    np.maximum(d, 0.0, out=d)
    return d


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen[-1]][None, :]).ravel()
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a center: lowest free index
            free = next(i for i in range(n) if i not in set(chosen))
            chosen.append(free)
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, _sq_dists(X, X[chosen[-1]][None, :]).ravel())
    return X[chosen].copy()


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator):
    centers = _kmeanspp(X, k, rng)
    assignment = None
    trajectory: list[float] = []
    for it in range(1, 101):
        d2 = _sq_dists(X, centers)
        new_assignment = d2.argmin(axis=1)  # argmin takes the lowest index on ties
        obj = float(d2[np.arange(X.shape[0]), new_assignment].sum())
        if trajectory:
            assert obj <= trajectory[-1] * (1 + 1e-12) + 1e-12, "objective increased"
        trajectory.append(obj)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            return assignment, centers, obj, it, trajectory
        assignment = new_assignment
        empties = [c for c in range(k) if not (assignment == c).any()]
        if empties:
            # re-seed each empty cluster from the point farthest from its
            # center, never reusing a point (ties toward the lowest index)
            per_point = d2[np.arange(X.shape[0]), assignment]
            farthest = np.argsort(-per_point, kind="stable")
            for c, p in zip(empties, farthest):
                centers[c] = X[int(p)]
        for c in range(k):
            if c in empties:
                continue
            members = assignment == c
            if members.any():
                centers[c] = X[members].mean(axis=0)
    d2 = _sq_dists(X, centers)
    assignment = d2.argmin(axis=1)
    obj = float(d2[np.arange(X.shape[0]), assignment].sum())
    trajectory.append(obj)
    return assignment, centers, obj, 100, trajectory


def _exact_distance_matrix(field: SpaceTimeField, c1: float, c2: float) -> np.ndarray:
    sqrt_gamma = field.data.copy()
    sqrt_gamma.data = np.sqrt(sqrt_gamma.data)
    sq_norms = np.asarray(sqrt_gamma.multiply(sqrt_gamma).sum(axis=1)).ravel()
    cross = np.asarray((sqrt_gamma @ sqrt_gamma.T).todense())
    h2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * cross
    np.maximum(h2, 0.0, out=h2)
    S, T = field.grid_s, field.grid_t
    ss = np.tile(field.s_coords, T)
    tt = np.repeat(field.t_coords, S)
    spatial = np.sqrt(
        c1 * (ss[:, None] - ss[None, :]) ** 2 + c2 * (tt[:, None] - tt[None, :]) ** 2
    )
    return np.sqrt(h2) + spatial


def _pam(D: np.ndarray, k: int):
    """Greedy build then best-improvement swaps under a precomputed metric."""
    n = D.shape[0]
    medoids = [int(D.sum(axis=1).argmin())]
    while len(medoids) < k:
        cur = D[:, medoids].min(axis=1)
        gains = np.maximum(cur[:, None] - D, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        medoids.append(int(gains.argmax()))
    medoids.sort()
    for _sweep in range(100):
        Dm = D[:, medoids]
        nearest = Dm.min(axis=1)
        cost = nearest.sum()
        best = (0.0, None, None)
        order = np.argsort(Dm, axis=1)
        second = Dm[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        which = order[:, 0]
        medoid_set = set(medoids)
        for mi in range(k):
            # removing medoid mi: points assigned to it fall back to second
            fallback = np.where(which == mi, second, nearest)
            new_costs = np.minimum(fallback[:, None], D).sum(axis=0)
            for h in range(n):
                if h in medoid_set:
                    continue
                delta = new_costs[h] - cost
                if delta < best[0] - 1e-12:
                    best = (delta, mi, h)
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        medoids.sort()
    Dm = D[:, medoids]
    assignment = Dm.argmin(axis=1)
    return assignment, float(Dm.min(axis=1).sum()), medoids


def segment(
    field: SpaceTimeField,
    k: int,
    c1: float | None = None,
    c2: float | None = None,
    seed: int = 0,
    method: str = "embedded-lloyd",
    restarts: int = 10,
) -> Segmentation:
    """Cluster grid points under Hellinger + weighted space-time distance.

    embedded-lloyd embeds each point as (sqrt gamma, sqrt(c1) s, sqrt(c2) t)
    so squared Euclidean distance is d_H^2 + c1 ds^2 + c2 dt^2, then runs
    seeded k-means++ and Lloyd to an assignment fixpoint (<= 100 rounds),
    over `restarts` independent initializations seeded from `seed`,
    keeping the lowest-objective run (ties: earliest restart).
    exact-medoids runs PAM under the exact (d_H + sqrt(...)) metric and is
    limited to 5000 grid points.
    """
    S, T = field.grid_s, field.grid_t
    n = S * T
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    dc1, dc2 = default_weights(field.extent)
    c1 = dc1 if c1 is None else float(c1)
    c2 = dc2 if c2 is None else float(c2)
    if c1 < 0 or c2 < 0:
        raise ValueError("c1 and c2 must be nonnegative")
    if method == "embedded-lloyd":
        X = _embed(field, c1, c2)
        best = None
        for child in np.random.SeedSequence(seed).spawn(restarts):
            rng = np.random.Generator(np.random.PCG64(child))
            result = _lloyd(X, k, rng)
            if best is None or result[2] < best[2]:
                best = result
        assignment, _centers, obj, iters, traj = best
    elif method == "exact-medoids":
        if n > 5000:
            raise ValueError(
                "exact-medoids supports at most 5000 grid points; "
                "use embedded-lloyd or subsample the grid"
            )
        D = _exact_distance_matrix(field, c1, c2)
        assignment, obj, _medoids = _pam(D, k)
        iters, traj = 1, (obj,)
    else:
        raise ValueError(f"unknown segmentation method {method!r}")
    grid_assignment = np.asarray(assignment, dtype=np.int64).reshape(T, S).T.copy()
    return Segmentation(
        k, grid_assignment, (c1, c2), obj, method, iters, tuple(traj)
    )
