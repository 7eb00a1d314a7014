"""Discrete probability measures and exact Wasserstein-1 machinery.

Distances are computed as exact transportation linear programs: a
permutation-assignment fast path for uniform equal-size measures (an optimal
coupling is then a permutation, by Birkhoff extremality) and a HiGHS LP for
the general case.  Everything here is a pure function over immutable inputs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

__all__ = [
    "GroundMetric",
    "L1",
    "L2",
    "DiscreteMeasure",
    "TransportPlan",
    "DualPotential",
    "w1_distance",
    "w1_cost",
    "w1_bruteforce_uniform",
    "c_transform",
    "displacement_interpolate",
    "geodesic_gap",
    "measure_to_json",
    "measure_from_json",
]

# Construction-time mass floor; avoids degenerate LP columns.
WEIGHT_PRUNE_TOL = 1e-15
# Coordinates are rounded to this many decimals before merging coincident
# interpolation atoms, making outputs deterministic.
MERGE_DECIMALS = 12

# 1e-10 is the tightest feasibility tolerance HiGHS accepts.
_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


@dataclass(frozen=True)
class GroundMetric:
    """Ground cost c(x, y) for transport problems; must be a true metric.

    Only ``l1`` and ``l2`` are accepted.  Squared-Euclidean is rejected at
    construction: it violates the triangle inequality, so it is not a valid
    W1 ground cost.
    """

    kind: str

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "_")
        if kind in ("sqeuclidean", "l2_squared", "squared_l2", "euclidean_squared"):
            raise ValueError(
                "squared Euclidean cost is not a metric (no triangle inequality); "
                "use 'l1' or 'l2' for W1"
            )
        if kind not in ("l1", "l2"):
            raise ValueError(f"unknown ground metric {self.kind!r}; expected 'l1' or 'l2'")
        object.__setattr__(self, "kind", kind)

    def pairwise(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Cost matrix C[i, j] = c(xs[i], ys[j]) for (n, d) and (m, d) inputs."""
        diff = xs[:, None, :] - ys[None, :, :]
        if self.kind == "l1":
            return np.abs(diff).sum(axis=2)
        return np.sqrt((diff * diff).sum(axis=2))

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if self.kind == "l1":
            return float(np.abs(d).sum())
        return float(np.sqrt((d * d).sum()))


L1 = GroundMetric("l1")
L2 = GroundMetric("l2")


@dataclass
class DiscreteMeasure:
    """Weighted point cloud: support ``points`` (n, d) with masses ``weights`` (n,).

    Weights must be nonnegative and sum to 1 within 1e-12.  Masses below
    1e-15 are pruned at construction and the remainder renormalized, which
    keeps downstream LPs nondegenerate.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be (n, d), got shape {pts.shape}")
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(w) != len(pts):
            raise ValueError(f"{len(pts)} points but {len(w)} weights")
        if pts.shape[1] < 1 or len(pts) == 0:
            raise ValueError("empty support")
        if np.any(w < 0):
            raise ValueError("negative weight")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1 within 1e-12")
        keep = w > WEIGHT_PRUNE_TOL
        pts, w = pts[keep], w[keep]
        if len(pts) == 0:
            raise ValueError("empty support after pruning zero-mass points")
        w = w / w.sum()
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def dirac(point) -> "DiscreteMeasure":
        return DiscreteMeasure(np.asarray([point], dtype=float), np.array([1.0]))

    @staticmethod
    def uniform(points) -> "DiscreteMeasure":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return DiscreteMeasure(pts, np.full(len(pts), 1.0 / len(pts)))

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


def _same_dim(a: DiscreteMeasure, b: DiscreteMeasure) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


@dataclass
class TransportPlan:
    """Optimal coupling between two discrete measures, with its transport cost.

    Rows marginalize to ``row_measure.weights`` and columns to
    ``col_measure.weights``, each within 1e-9 (checked at construction).
    """

    row_measure: DiscreteMeasure
    col_measure: DiscreteMeasure
    coupling: np.ndarray
    cost: float

    def __post_init__(self):
        g = np.asarray(self.coupling, dtype=float)
        if g.shape != (len(self.row_measure), len(self.col_measure)):
            raise ValueError(f"coupling shape {g.shape} does not match measures")
        if np.any(g < -1e-12):
            raise ValueError("negative coupling entry")
        if np.max(np.abs(g.sum(axis=1) - self.row_measure.weights)) > 1e-9:
            raise ValueError("row marginals infeasible")
        if np.max(np.abs(g.sum(axis=0) - self.col_measure.weights)) > 1e-9:
            raise ValueError("column marginals infeasible")
        g.setflags(write=False)
        self.coupling = g
        self.cost = float(self.cost)

    def recompute_cost(self, metric: GroundMetric) -> float:
        c = metric.pairwise(self.row_measure.points, self.col_measure.points)
        return float((self.coupling * c).sum())


@dataclass
class DualPotential:
    """Kantorovich potential sampled on a finite support.

    Feasible for the W1 dual iff 1-Lipschitz on the support, i.e.
    ``lipschitz_defect(metric) <= 0`` up to tolerance.
    """

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        if len(pts) != len(vals):
            raise ValueError("one value per support point required")
        self.points = pts
        self.values = vals

    def lipschitz_defect(self, metric: GroundMetric) -> float:
        """max over pairs of |phi_i - phi_j| - c(x_i, x_j); <= 0 means 1-Lipschitz."""
        c = metric.pairwise(self.points, self.points)
        gap = np.abs(self.values[:, None] - self.values[None, :]) - c
        np.fill_diagonal(gap, -np.inf)
        return float(gap.max()) if len(self.values) > 1 else -np.inf

    def pairing(self, measure_a: DiscreteMeasure, measure_b: DiscreteMeasure) -> float:
        """Dual objective int phi d(a) - int phi d(b) when defined on a shared support."""
        return float(self.values @ measure_a.weights - self.values @ measure_b.weights)


def _solve_transport(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact transportation LP: min <C, g> s.t. g 1 = a, g^T 1 = b, g >= 0."""
    n, m = cost.shape
    if n == m and np.all(a == a[0]) and np.all(b == b[0]) and abs(a[0] - b[0]) < 1e-15:
        # Uniform equal-size: an optimal coupling is a permutation.
        rows, cols = linear_sum_assignment(cost)
        g = np.zeros_like(cost)
        g[rows, cols] = a
        return g, float(cost[rows, cols].sum() * a[0])

    # One marginal row is redundant; dropping it keeps the system full-rank.
    row_idx = np.repeat(np.arange(n), m)
    col_idx = np.tile(np.arange(m), n) + n
    entries = np.ones(2 * n * m)
    rows = np.concatenate([row_idx, col_idx])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    a_eq = sparse.csr_matrix((entries, (rows, cols)), shape=(n + m, n * m))[:-1]
    b_eq = np.concatenate([a, b])[:-1]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    g = np.clip(res.x.reshape(n, m), 0.0, None)
    return g, float((g * cost).sum())


def w1_distance(a: DiscreteMeasure, b: DiscreteMeasure, metric: GroundMetric = L2) -> TransportPlan:
    """Exact W1 between two discrete measures, returned as an optimal coupling."""
    _same_dim(a, b)
    cost = metric.pairwise(a.points, b.points)
    g, value = _solve_transport(cost, a.weights, b.weights)
    return TransportPlan(a, b, g, value)


def w1_cost(a: DiscreteMeasure, b: DiscreteMeasure, metric: GroundMetric = L2) -> float:
    """W1 value only; skips building the TransportPlan object."""
    _same_dim(a, b)
    cost = metric.pairwise(a.points, b.points)
    _, value = _solve_transport(cost, a.weights, b.weights)
    return value


def w1_bruteforce_uniform(a: DiscreteMeasure, b: DiscreteMeasure, metric: GroundMetric = L2) -> float:
    """Exact W1 for uniform equal-size measures by exhausting all n! assignments.

    Independent oracle for ``w1_distance``: for uniform marginals of equal
    size the transportation polytope's vertices are permutation matrices, so
    the minimum over assignments is the LP optimum.  Limited to n <= 8.
    """
    _same_dim(a, b)
    if not (a.is_uniform() and b.is_uniform()):
        raise ValueError("brute force requires uniform weights")
    n = len(a)
    if len(b) != n:
        raise ValueError("brute force requires equal support sizes")
    if n > 8:
        raise ValueError("brute force limited to n <= 8")
    cost = metric.pairwise(a.points, b.points)
    idx = np.arange(n)
    best = min(cost[idx, perm].sum() for perm in itertools.permutations(range(n)))
    return float(best / n)


def c_transform(phi: DualPotential, metric: GroundMetric) -> DualPotential:
    """c-transform of a potential on its own support.

    phi^c(y_j) = min_i [c(x_i, y_j) - phi(x_i)].  For an already 1-Lipschitz
    phi this is exactly -phi; in general the result is always 1-Lipschitz
    (a pointwise minimum of 1-Lipschitz functions), hence dual-feasible.
    """
    c = metric.pairwise(phi.points, phi.points)
    values = (c - phi.values[:, None]).min(axis=0)
    return DualPotential(phi.points, values)


def _merge_atoms(points: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rounded = np.round(points, MERGE_DECIMALS)
    order = np.lexsort(rounded.T[::-1])
    rounded, weights = rounded[order], weights[order]
    boundary = np.ones(len(rounded), dtype=bool)
    boundary[1:] = np.any(rounded[1:] != rounded[:-1], axis=1)
    group = np.cumsum(boundary) - 1
    merged_w = np.zeros(group[-1] + 1)
    np.add.at(merged_w, group, weights)
    return rounded[boundary], merged_w


def displacement_interpolate(plan: TransportPlan, t: float) -> DiscreteMeasure:
    """McCann interpolation: atom g[i, j] placed at (1-t) x_i + t y_j.

    For an optimal ``plan`` under a norm cost the result sits on a minimal
    geodesic: W1(a, sigma_t) = t W1(a, b) and W1(sigma_t, b) = (1-t) W1(a, b).
    Coincident output atoms are merged with summed mass.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    i_idx, j_idx = np.nonzero(plan.coupling > WEIGHT_PRUNE_TOL)
    pts = (1.0 - t) * plan.row_measure.points[i_idx] + t * plan.col_measure.points[j_idx]
    w = plan.coupling[i_idx, j_idx]
    pts, w = _merge_atoms(pts, w)
    return DiscreteMeasure(pts, w / w.sum())


def geodesic_gap(
    a: DiscreteMeasure,
    mid: DiscreteMeasure,
    b: DiscreteMeasure,
    metric: GroundMetric = L2,
) -> float:
    """W1(a, mid) + W1(mid, b) - W1(a, b); zero certifies mid on a minimal geodesic."""
    _same_dim(a, mid)
    _same_dim(mid, b)
    return w1_cost(a, mid, metric) + w1_cost(mid, b, metric) - w1_cost(a, b, metric)


def measure_to_json(measure: DiscreteMeasure) -> str:
    return json.dumps(
        {"points": measure.points.tolist(), "weights": measure.weights.tolist()}
    )


def measure_from_json(text: str) -> DiscreteMeasure:
    """Parse a measure from JSON, re-validating all invariants."""
    obj = json.loads(text)
    if not isinstance(obj, dict) or "points" not in obj or "weights" not in obj:
        raise ValueError("measure JSON must have 'points' and 'weights' fields")
    return DiscreteMeasure(np.asarray(obj["points"], dtype=float), np.asarray(obj["weights"], dtype=float))
