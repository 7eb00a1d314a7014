"""Exact LP oracles for weighted W1 barycenters and recursive pairwise coalescence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .measures import (
    MERGE_DECIMALS,
    DiscreteMeasure,
    GroundMetric,
    displacement_interpolate,
    geodesic_gap,
    w1_cost,
    w1_distance,
)

__all__ = [
    "WassersteinBallConstraint",
    "BarycenterProblem",
    "lagrangian_weights",
    "barycenter_objective",
    "fixed_support_barycenter",
    "recursive_coalesce_lp",
    "refined_forming_set_check",
    "default_grid_support",
]

# Joint-LP size guard: support size times total input support size.
MAX_LP_CELLS = 4096


@dataclass(frozen=True)
class WassersteinBallConstraint:
    """Knowledge transferred from one node: a W1 ball around its model."""

    center: DiscreteMeasure
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


@dataclass
class BarycenterProblem:
    """Weighted-sum-of-W1 objective over a fixed candidate support."""

    inputs: list[tuple[DiscreteMeasure, float]]
    support: np.ndarray
    metric: GroundMetric

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one input measure required")
        if any(lam <= 0 for _, lam in self.inputs):
            raise ValueError("all weights must be positive")
        self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
        if len(self.support) == 0:
            raise ValueError("empty support")
        dims = {m.dim for m, _ in self.inputs} | {self.support.shape[1]}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch across inputs/support: {sorted(dims)}")


def lagrangian_weights(
    constraints: list[WassersteinBallConstraint],
) -> list[tuple[DiscreteMeasure, float]]:
    """Relaxation weights: one per ball, the reciprocal of its radius."""
    return [(c.center, 1.0 / c.radius) for c in constraints]


def barycenter_objective(nu: DiscreteMeasure, problem: BarycenterProblem) -> float:
    """Sum of lambda_k * W1(nu, mu_k), each distance solved exactly."""
    return sum(lam * w1_cost(nu, mu, problem.metric) for mu, lam in problem.inputs)


def default_grid_support(measures: list[DiscreteMeasure], points_per_axis: int = 11) -> np.ndarray:
    """Regular grid over the bounding box of all input supports."""
    pts = np.vstack([m.points for m in measures])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axes = [
        np.linspace(lo[i], hi[i], points_per_axis) if hi[i] > lo[i] else np.array([lo[i]])
        for i in range(pts.shape[1])
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def fixed_support_barycenter(problem: BarycenterProblem) -> tuple[DiscreteMeasure, float]:
    """Joint LP over couplings {gamma_k} and the barycenter weights nu.

    minimize   sum_k lambda_k <C_k, gamma_k>
    subject to gamma_k 1 = nu,  gamma_k^T 1 = mu_k,  gamma_k >= 0,  nu >= 0.

    (sum nu = 1 is implied by the marginal constraints.)  Returns the optimal
    measure on the given support and the optimal objective value.
    """
    support = problem.support
    s = len(support)
    sizes = [len(m) for m, _ in problem.inputs]
    if s * sum(sizes) > MAX_LP_CELLS:
        raise ValueError(
            f"problem too large: support {s} x total input size {sum(sizes)} "
            f"exceeds {MAX_LP_CELLS} cells"
        )

    # Variable layout: [gamma_1 flat (s*n_1), ..., gamma_K flat, nu (s)].
    offsets = np.cumsum([0] + [s * n for n in sizes])
    nu_off = int(offsets[-1])
    n_vars = nu_off + s

    cost = np.zeros(n_vars)
    rows, cols, vals, rhs = [], [], [], []
    row = 0
    for k, (mu, lam) in enumerate(problem.inputs):
        n = sizes[k]
        c_k = problem.metric.pairwise(support, mu.points)
        cost[offsets[k] : offsets[k + 1]] = lam * c_k.ravel()
        # row sums minus nu vanish
        for i in range(s):
            base = offsets[k] + i * n
            cols.extend(range(base, base + n))
            rows.extend([row] * n)
            vals.extend([1.0] * n)
            cols.append(nu_off + i)
            rows.append(row)
            vals.append(-1.0)
            rhs.append(0.0)
            row += 1
        # column sums hit mu_k
        for j in range(n):
            cols.extend(range(offsets[k] + j, offsets[k + 1], n))
            rows.extend([row] * s)
            vals.extend([1.0] * s)
            rhs.append(mu.weights[j])
            row += 1

    a_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(row, n_vars))
    res = linprog(cost, A_eq=a_eq, b_eq=np.array(rhs), method="highs")
    if res.status != 0:
        raise RuntimeError(f"barycenter LP failed: {res.message}")
    nu = np.clip(res.x[nu_off:], 0.0, None)
    nu = nu / nu.sum()
    return DiscreteMeasure(support, nu), float(res.fun)


def recursive_coalesce_lp(
    measures: list[DiscreteMeasure],
    weights: list[float],
    metric: GroundMetric,
) -> list[DiscreteMeasure]:
    """Pairwise recursive barycenter sequence on exact couplings.

    Starts from the first measure; step k interpolates the running barycenter
    toward mu_k at t* = lambda_k / (lambda_accumulated + lambda_k), so every
    intermediate lies on a minimal geodesic of its pair (gap <= 1e-6 by
    construction).  For equal weights the pairwise step is the midpoint.  The
    W1 objective is flat along each geodesic, so t* is a documented
    convention, not a claimed unique optimum; input order matters and is the
    caller's responsibility.
    """
    if not measures:
        raise ValueError("at least one measure required")
    if len(weights) != len(measures):
        raise ValueError("one weight per measure required")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")

    sequence = [measures[0]]
    lam_acc = float(weights[0])
    for mu, lam in zip(measures[1:], weights[1:]):
        plan = w1_distance(sequence[-1], mu, metric)
        t_star = lam / (lam_acc + lam)
        sequence.append(displacement_interpolate(plan, t_star))
        lam_acc += lam
    return sequence


def _canonical(measure: DiscreteMeasure) -> tuple:
    pts = np.round(measure.points, MERGE_DECIMALS)
    order = np.lexsort(pts.T[::-1])
    return (pts[order].tobytes(), np.round(measure.weights[order], MERGE_DECIMALS).tobytes())


def measures_equal(a: DiscreteMeasure, b: DiscreteMeasure) -> bool:
    return a.dim == b.dim and len(a) == len(b) and _canonical(a) == _canonical(b)


def refined_forming_set_check(
    candidates: list[DiscreteMeasure],
    full_set: list[DiscreteMeasure],
    metric: GroundMetric,
    tol: float = 1e-9,
) -> bool:
    """True iff each excluded measure lies on a minimal geodesic of a candidate pair.

    This is the checkable sufficient condition for the candidates to generate
    the same baryregion as the full set.
    """
    excluded = [
        m for m in full_set if not any(measures_equal(m, c) for c in candidates)
    ]
    for m in excluded:
        on_some_geodesic = any(
            geodesic_gap(candidates[i], m, candidates[j], metric) <= tol
            for i in range(len(candidates))
            for j in range(i + 1, len(candidates))
        )
        if not on_some_geodesic:
            return False
    return True
