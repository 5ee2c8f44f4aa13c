"""Desk-scale linear relaxations.

A dense two-phase primal simplex with Bland's rule: slow but cycle-free and
entirely observable, which matters more here than speed — downstream rounding
needs basic optimal solutions (vertices), and the test oracles re-derive the
same optima by brute-force vertex enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CipInstance, FractionalSolution, MipInstance

__all__ = ["LpReport", "solve_cip_lp", "solve_mip_lp", "ingest_solution", "InfeasibleError"]

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
INGEST_TOL = 1e-6


class InfeasibleError(ValueError):
    """A supplied solution violates the instance beyond tolerance."""


@dataclass(frozen=True)
class LpReport:
    solution: FractionalSolution | None
    objective: float
    iterations: int
    status: str  # "optimal" | "infeasible" | "iteration-limit"


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]


def _run_simplex(tableau, basis, allowed, budget: int) -> tuple[int, str]:
    """Bland's rule on a tableau whose last row holds reduced costs.

    Returns (iterations used, status); mutates tableau and basis in place.
    """
    iterations = 0
    n_cols = tableau.shape[1] - 1
    while iterations < budget:
        entering = -1
        for j in range(n_cols):
            if allowed[j] and tableau[-1, j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return iterations, "optimal"
        best_ratio = math.inf
        leaving = -1
        for i in range(tableau.shape[0] - 1):
            coeff = tableau[i, entering]
            if coeff > PIVOT_TOL:
                ratio = tableau[i, -1] / coeff
                if ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise RuntimeError("objective unbounded; not reachable for covering data")
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
        iterations += 1
    return iterations, "iteration-limit"


def _two_phase(
    costs: np.ndarray,
    eq_lhs: np.ndarray,
    eq_rhs: np.ndarray,
    iteration_limit: int,
) -> tuple[np.ndarray | None, int, str]:
    """min costs.x over {eq_lhs x = eq_rhs, x >= 0}; returns (x, iters, status)."""
    m, n = eq_lhs.shape
    lhs = eq_lhs.copy()
    rhs = eq_rhs.copy()
    flip = rhs < 0.0
    lhs[flip] *= -1.0
    rhs[flip] *= -1.0

    width = n + m  # structural columns then one artificial per row
    tableau = np.zeros((m + 1, width + 1))
    tableau[:m, :n] = lhs
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = rhs
    basis = list(range(n, n + m))
    tableau[-1, n : n + m] = 1.0
    for i in range(m):  # price out the artificial basis
        tableau[-1] -= tableau[i]
    allowed = np.ones(width, dtype=bool)
    used, status = _run_simplex(tableau, basis, allowed, iteration_limit)
    if status != "optimal":
        return None, used, status
    if -tableau[-1, -1] > 1e-7:
        return None, used, "infeasible"
    # Drive surviving artificials out of the basis where a structural pivot exists.
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(tableau[i, j]) > PIVOT_TOL:
                    _pivot(tableau, i, j)
                    basis[i] = j
                    break
    allowed[n:] = False

    tableau[-1, :] = 0.0
    tableau[-1, :n] = costs
    for i in range(m):
        if basis[i] < n and tableau[-1, basis[i]] != 0.0:
            tableau[-1] -= tableau[-1, basis[i]] * tableau[i]
    used2, status = _run_simplex(tableau, basis, allowed, iteration_limit - used)
    if status != "optimal":
        return None, used + used2, status
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i, -1]
    return x, used + used2, "optimal"


def solve_cip_lp(instance: CipInstance, objective_index: int = 0) -> LpReport:
    """Relaxation min c.x s.t. A x >= b, x >= 0, solved to a vertex."""
    if not 0 <= objective_index < instance.n_criteria:
        raise ValueError(f"objective index {objective_index} out of range")
    m, n = instance.m, instance.n
    # A x - surplus = b
    eq_lhs = np.hstack([instance.a_matrix, -np.eye(m)])
    costs = np.concatenate([instance.costs[objective_index], np.zeros(m)])
    limit = 50 * (m + n)
    x_full, iterations, status = _two_phase(costs, eq_lhs, instance.demands.copy(), limit)
    if status != "optimal":
        return LpReport(None, math.nan, iterations, status)
    x = x_full[:n]
    solution = ingest_solution(instance, x)
    assert solution.feasibility_slack <= FEASIBILITY_TOL, "optimal vertex must be feasible"
    return LpReport(solution, solution.objective_values[objective_index], iterations, status)


def solve_mip_lp(instance: MipInstance) -> LpReport:
    """Relaxation: minimize the max row load W over the product of simplices.

    Variables are the fractional assignments plus W; the returned point is a
    vertex, so at most m assignment entries are strictly fractional.
    """
    m, n = instance.m, instance.n_cols
    n_groups = instance.n_groups
    # Rows: group sums = 1, then A x - W + slack = 0.
    eq_lhs = np.zeros((n_groups + m, n + 1 + m))
    eq_rhs = np.zeros(n_groups + m)
    for g in range(n_groups):
        eq_lhs[g, instance.group_slice(g)] = 1.0
        eq_rhs[g] = 1.0
    eq_lhs[n_groups:, :n] = instance.a_matrix
    eq_lhs[n_groups:, n] = -1.0
    eq_lhs[n_groups:, n + 1 :] = np.eye(m)
    costs = np.zeros(n + 1 + m)
    costs[n] = 1.0
    limit = 50 * (n_groups + m + n + 1)
    x_full, iterations, status = _two_phase(costs, eq_lhs, eq_rhs, limit)
    if status != "optimal":
        return LpReport(None, math.nan, iterations, status)
    x = x_full[:n]
    solution = ingest_solution(instance, x)
    return LpReport(solution, solution.objective_values[0], iterations, status)


def ingest_solution(instance, x) -> FractionalSolution:
    """Validate an externally produced fractional point and wrap it.

    Violations up to 1e-6 are tolerated (and recorded as slack); anything
    larger raises InfeasibleError naming the worst constraint.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(instance, CipInstance):
        if x.shape != (instance.n,):
            raise InfeasibleError(f"expected {instance.n} values, got shape {x.shape}")
        if np.any(x < -INGEST_TOL):
            raise InfeasibleError("solution has negative entries")
        loads = instance.a_matrix @ x
        shortfall = instance.demands - loads
        worst = int(np.argmax(shortfall))
        slack = max(0.0, float(shortfall[worst]))
        if slack > INGEST_TOL:
            raise InfeasibleError(
                f"row {worst} misses its demand by {slack:.3e} (beyond 1e-6)"
            )
        objectives = tuple(float(cost @ x) for cost in instance.costs)
        return FractionalSolution(x=np.maximum(x, 0.0), objective_values=objectives, feasibility_slack=slack)
    if isinstance(instance, MipInstance):
        if x.shape != (instance.n_cols,):
            raise InfeasibleError(f"expected {instance.n_cols} values, got shape {x.shape}")
        if np.any(x < -INGEST_TOL):
            raise InfeasibleError("solution has negative entries")
        sums = np.array([x[instance.group_slice(g)].sum() for g in range(instance.n_groups)])
        deviation = np.abs(sums - 1.0)
        worst = int(np.argmax(deviation))
        slack = float(deviation[worst])
        if slack > INGEST_TOL:
            raise InfeasibleError(
                f"group {worst} mass sums to {sums[worst]:.9f} (beyond 1e-6 from 1)"
            )
        value = float((instance.a_matrix @ x).max())
        return FractionalSolution(x=np.maximum(x, 0.0), objective_values=(value,), feasibility_slack=slack)
    raise TypeError(f"unsupported instance type {type(instance)!r}")
