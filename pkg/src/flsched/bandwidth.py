"""Bandwidth-share allocation over the selected clients.

Minimizes a smooth surrogate of the weighted worst-client latency plus the
backlog-priced communication energy, over the simplex with a per-client
floor. The non-smooth max is replaced by log-sum-exp (additive error at most
ln(m)); the surrogate is convex, and an equality-constrained Newton barrier
method solves it. A dense grid search over the simplex slice serves as the
verification oracle for small instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import Infeasible, NoConverge, TooLarge

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class AllocationInstance:
    """Per-selected-client coefficients of the allocation objective.

    comp_latency[i] + lat_coeff[i]/b_i is client i's predicted latency;
    price_coeff[i]/b_i is its backlog-priced communication energy.
    """

    comp_latency: np.ndarray
    lat_coeff: np.ndarray
    price_coeff: np.ndarray
    penalty_weight: float
    min_ratio: float

    def __post_init__(self):
        c = np.asarray(self.comp_latency, dtype=float)
        s = np.asarray(self.lat_coeff, dtype=float)
        g = np.asarray(self.price_coeff, dtype=float)
        object.__setattr__(self, "comp_latency", c)
        object.__setattr__(self, "lat_coeff", s)
        object.__setattr__(self, "price_coeff", g)
        if not (c.shape == s.shape == g.shape) or c.ndim != 1 or c.size == 0:
            raise ValueError("coefficient arrays must be 1-d, non-empty, equal length")
        for arr in (c, s, g):
            if np.any(~np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError("coefficients must be finite and non-negative")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if not (0 < self.min_ratio <= 1):
            raise ValueError("min_ratio must lie in (0, 1]")
        if self.size * self.min_ratio > 1 + FEAS_TOL:
            raise Infeasible("floor times client count exceeds the whole band")

    @property
    def size(self) -> int:
        return self.comp_latency.size


@dataclass(frozen=True)
class Allocation:
    """Solver output: shares on the floored simplex plus convergence data."""

    ratios: np.ndarray
    objective: float  # smoothed objective value at ratios
    iterations: int
    duality_gap: float
    max_objective: float = float("nan")  # objective with the true (non-smoothed) max term


@dataclass(frozen=True)
class BarrierParams:
    t0: float = 1.0
    mu_growth: float = 20.0
    tol: float = 1e-8
    max_newton: int = 200
    line_alpha: float = 0.25
    line_beta: float = 0.5
    newton_tol: float = 1e-10  # on half the squared Newton decrement


class SmoothedEval(NamedTuple):
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def lse_error_bound(selected_count: int) -> float:
    """Additive gap bound of the smoothed max: 0 <= LSE - max <= ln(m)."""
    if selected_count < 1:
        raise ValueError("need at least one selected client")
    return math.log(selected_count)


def _latency_terms(ratios: np.ndarray, instance: AllocationInstance) -> np.ndarray:
    return instance.comp_latency + instance.lat_coeff / ratios


def smoothed_objective(ratios: np.ndarray, instance: AllocationInstance) -> SmoothedEval:
    """Value, gradient, and Hessian of the smoothed objective at interior ratios.

    Log-sum-exp is evaluated with the usual max shift so large latency terms
    cannot overflow. The Hessian is positive semidefinite (softmax curvature
    conjugated by a diagonal plus non-negative diagonal terms).
    """
    b = np.asarray(ratios, dtype=float)
    if np.any(b <= 0):
        raise ValueError("ratios must be strictly positive")
    v = instance.penalty_weight
    u = _latency_terms(b, instance)
    shift = u.max()
    ex = np.exp(u - shift)
    total = ex.sum()
    w = ex / total  # softmax weights
    value = v * (shift + math.log(total)) + float((instance.price_coeff / b).sum())
    du = -instance.lat_coeff / b ** 2
    grad = v * w * du - instance.price_coeff / b ** 2
    wd = w * du
    hess = v * (np.diag(w * du ** 2) - np.outer(wd, wd))
    diag_extra = v * w * 2.0 * instance.lat_coeff / b ** 3 + 2.0 * instance.price_coeff / b ** 3
    hess[np.diag_indices_from(hess)] += diag_extra
    return SmoothedEval(value, grad, hess)


def exact_objective(ratios: np.ndarray, instance: AllocationInstance) -> float:
    """Objective with the true (non-smoothed) max latency term."""
    b = np.asarray(ratios, dtype=float)
    u = _latency_terms(b, instance)
    return instance.penalty_weight * float(u.max()) + float((instance.price_coeff / b).sum())


def smoothing_gap(ratios: np.ndarray, instance: AllocationInstance) -> float:
    """LSE minus max of the latency terms; lies in [0, ln(m)]."""
    u = _latency_terms(np.asarray(ratios, dtype=float), instance)
    shift = u.max()
    return float(math.log(np.exp(u - shift).sum()))


def _forced_allocation(instance: AllocationInstance) -> Allocation:
    b = np.full(instance.size, instance.min_ratio)
    return Allocation(b, smoothed_objective(b, instance).value, 0, 0.0,
                      exact_objective(b, instance))


def barrier_solve(instance: AllocationInstance, params: BarrierParams | None = None) -> Allocation:
    """Interior-point solve of the smoothed allocation problem.

    Newton steps solve the KKT system of the barrier subproblem with the
    simplex equality kept exactly; backtracking keeps iterates strictly above
    the floor. Deterministic for fixed inputs. Raises Infeasible when the
    floor cannot be met and NoConverge when Newton stalls.
    """
    params = params or BarrierParams()
    m = instance.size
    b_min = instance.min_ratio
    if m * b_min > 1 + FEAS_TOL:
        raise Infeasible("floor times client count exceeds the whole band")
    if abs(m * b_min - 1.0) <= FEAS_TOL:
        return _forced_allocation(instance)
    if m == 1:
        b = np.array([1.0])
        return Allocation(b, smoothed_objective(b, instance).value, 0, 0.0,
                          exact_objective(b, instance))

    b = np.full(m, 1.0 / m)
    t = params.t0
    ones = np.ones(m)
    total_newton = 0

    # centering objective f + phi/t keeps values O(f) however large t grows,
    # so line-search comparisons stay resolvable in double precision
    def barrier_value(x: np.ndarray, t_now: float) -> float:
        return smoothed_objective(x, instance).value - float(np.log(x - b_min).sum()) / t_now

    while True:
        for _ in range(params.max_newton):
            total_newton += 1
            ev = smoothed_objective(b, instance)
            slack = b - b_min
            grad = ev.gradient - 1.0 / (t * slack)
            hess = ev.hessian
            hess[np.diag_indices_from(hess)] += 1.0 / (t * slack ** 2)
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = hess
            kkt[:m, m] = ones
            kkt[m, :m] = ones
            rhs = np.zeros(m + 1)
            rhs[:m] = -grad
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError as exc:
                raise NoConverge("singular KKT system") from exc
            step = sol[:m]
            decrement_sq = float(-grad @ step)
            if decrement_sq <= 0 or decrement_sq / 2.0 <= params.newton_tol:
                break
            if np.abs(step).max() <= 1e-14 * max(1.0, float(np.abs(b).max())):
                break  # step at float-noise level: numerical optimum reached
            # backtracking line search on the barrier subproblem
            base = barrier_value(b, t)
            slope = float(grad @ step)
            s = 1.0
            improved = False
            for _ in range(60):
                trial = b + s * step
                if np.all(trial > b_min) and \
                        barrier_value(trial, t) <= base + params.line_alpha * s * slope:
                    improved = True
                    break
                s *= params.line_beta
            if not improved:
                # descent smaller than float precision on t*f: numerical floor
                break
            b = b + s * step
        else:
            raise NoConverge("Newton iteration budget exhausted")
        if m / t <= params.tol:
            break
        t *= params.mu_growth

    value = smoothed_objective(b, instance).value
    gap = smoothing_gap(b, instance)
    if not (-1e-12 <= gap <= lse_error_bound(m) + 1e-12):
        raise AssertionError("smoothing gap left [0, ln(m)]")
    return Allocation(b, value, total_newton, m / t, exact_objective(b, instance))


def simplex_grid(m: int, b_min: float, step: float) -> np.ndarray:
    """Feasible share vectors (rows) on the floored simplex at a given resolution.

    First m-1 coordinates walk a regular lattice from the floor; the last
    coordinate closes the simplex and is kept above the floor. Supports m <= 3.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > 3:
        raise TooLarge("simplex grid limited to 3 clients")
    if m * b_min > 1 + FEAS_TOL:
        raise Infeasible("floor times client count exceeds the whole band")
    if m == 1:
        return np.array([[1.0]])
    top = 1.0 - (m - 1) * b_min
    n = int(math.floor((top - b_min) / step + 1e-9))
    axis = b_min + step * np.arange(n + 1)
    if m == 2:
        b1 = axis
        b2 = 1.0 - b1
        keep = b2 >= b_min - FEAS_TOL
        return np.column_stack([b1[keep], b2[keep]])
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    b1 = g1.ravel()
    b2 = g2.ravel()
    b3 = 1.0 - b1 - b2
    keep = b3 >= b_min - FEAS_TOL
    return np.column_stack([b1[keep], b2[keep], b3[keep]])


def grid_oracle(instance: AllocationInstance, step: float) -> Allocation:
    """Exhaustive grid minimizer of the smoothed objective (small m only).

    The oracle is deliberately independent of the barrier path: it evaluates
    the objective formula directly on every feasible grid point.
    """
    if instance.size > 3:
        raise TooLarge("grid oracle limited to 3 clients")
    if step > 1e-3 + FEAS_TOL:
        raise ValueError("oracle grid step must be at most 1e-3")
    points = simplex_grid(instance.size, instance.min_ratio, step)
    u = instance.comp_latency[None, :] + instance.lat_coeff[None, :] / points
    lse = u[:, 0]
    for j in range(1, u.shape[1]):
        lse = np.logaddexp(lse, u[:, j])
    values = instance.penalty_weight * lse + (instance.price_coeff[None, :] / points).sum(axis=1)
    best = int(np.argmin(values))
    b = points[best]
    return Allocation(b, float(values[best]), 0, 0.0, exact_objective(b, instance))
