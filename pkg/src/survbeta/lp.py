"""A small dense linear-programming container and two-phase simplex solver.

Problem sizes here are modest (the pair-reduced training programs), so a
dense tableau with Dantzig pricing and a Bland anti-cycling fallback is
enough; no external solver is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SolverFailure

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7


@dataclass
class LinearProgram:
    """Minimize ``c @ x`` subject to row-wise inequalities, equalities and bounds.

    ``senses`` holds +1 for a ``>=`` row and -1 for ``<=``.  Bounds default
    to ``x >= 0`` with no upper limit.
    """

    c: np.ndarray
    a_ineq: np.ndarray
    b_ineq: np.ndarray
    senses: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.a_ineq = np.asarray(self.a_ineq, dtype=float).reshape(-1, n)
        self.b_ineq = np.asarray(self.b_ineq, dtype=float)
        self.senses = np.asarray(self.senses, dtype=int)
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        if self.lower is None:
            self.lower = np.zeros(n)
        else:
            self.lower = np.asarray(self.lower, dtype=float)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        else:
            self.upper = np.asarray(self.upper, dtype=float)
        if self.b_ineq.shape != (self.a_ineq.shape[0],):
            raise InvalidInputError("b_ineq must match a_ineq rows")
        if self.senses.shape != (self.a_ineq.shape[0],):
            raise InvalidInputError("senses must match a_ineq rows")
        if self.b_eq.shape != (self.a_eq.shape[0],):
            raise InvalidInputError("b_eq must match a_eq rows")
        for arr in (self.c, self.a_ineq, self.b_ineq, self.a_eq, self.b_eq, self.lower):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError("LP coefficients must be finite")
        if np.any(np.isnan(self.upper)):
            raise InvalidInputError("upper bounds must not be NaN")
        if np.any(self.senses**2 != 1):
            raise InvalidInputError("senses must be +1 (>=) or -1 (<=)")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def constraint_violation(self, x) -> float:
        """Largest violation of any constraint or bound at ``x``."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.a_ineq.shape[0]:
            resid = (self.a_ineq @ x - self.b_ineq) * self.senses
            worst = max(worst, float(np.max(-resid, initial=0.0)))
        if self.a_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.a_eq @ x - self.b_eq), initial=0.0)))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        finite = np.isfinite(self.upper)
        if finite.any():
            worst = max(worst, float(np.max((x - self.upper)[finite], initial=0.0)))
        return worst


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(a: np.ndarray, b: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv = a[row, col]
    a[row] /= piv
    b[row] /= piv
    factors = a[:, col].copy()
    factors[row] = 0.0
    a -= np.outer(factors, a[row])
    b -= factors * b[row]
    np.clip(b, 0.0, None, out=b)
    basis[row] = col


def _reduced_costs(a, b, basis, cost):
    obj = cost.copy()
    val = 0.0
    for r, j in enumerate(basis):
        if obj[j] != 0.0:
            val += obj[j] * b[r]
            obj -= obj[j] * a[r]
    return obj, val


def _iterate(a, b, basis, cost, blocked, max_iterations, iteration_count):
    """Run simplex pivots until optimal; returns the total iteration count.

    Switches to Bland's rule after a streak of non-improving pivots to
    break cycling on degenerate vertices.
    """
    m = a.shape[0]
    obj, _ = _reduced_costs(a, b, basis, cost)
    stall = 0
    last_val = float(cost[basis] @ b)
    while True:
        use_bland = stall > 2 * m + 10
        candidates = np.where(blocked, np.inf, obj)
        if use_bland:
            eligible = np.nonzero(candidates < -_PIVOT_TOL)[0]
            if eligible.size == 0:
                return iteration_count
            col = int(eligible[0])
        else:
            col = int(np.argmin(candidates))
            if candidates[col] >= -_PIVOT_TOL:
                return iteration_count
        direction = a[:, col]
        positive = direction > _PIVOT_TOL
        if not positive.any():
            raise SolverFailure("LP is unbounded along a pivot direction")
        ratios = np.full(m, np.inf)
        ratios[positive] = b[positive] / direction[positive]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12)[0]
        if use_bland:
            row = int(ties[np.argmin(basis[ties])])
        else:
            row = int(ties[np.argmax(direction[ties])])
        _pivot(a, b, basis, row, col)
        obj -= obj[col] * a[row]
        iteration_count += 1
        if iteration_count > max_iterations:
            raise _IterationLimit(iteration_count)
        val = float(cost[basis] @ b)
        stall = stall + 1 if val >= last_val - 1e-12 else 0
        last_val = val


class _IterationLimit(Exception):
    def __init__(self, count):
        self.count = count


def solve_lp(lp: LinearProgram, max_iterations: int | None = None) -> LPSolution:
    """Solve a linear program with the two-phase dense simplex method.

    Returns a vertex solution whose constraints hold within ``1e-8``.  An
    exceeded iteration limit raises :class:`SolverFailure` carrying the
    best feasible point reached so far.
    """
    n = lp.n_vars
    lower = lp.lower
    if not np.all(np.isfinite(lower)):
        raise InvalidInputError("lower bounds must be finite")

    rows: list[tuple[np.ndarray, float, str]] = []
    for coeffs, rhs, sense in zip(lp.a_ineq, lp.b_ineq, lp.senses):
        rows.append((coeffs.astype(float), float(rhs - coeffs @ lower), "ge" if sense > 0 else "le"))
    for coeffs, rhs in zip(lp.a_eq, lp.b_eq):
        rows.append((coeffs.astype(float), float(rhs - coeffs @ lower), "eq"))
    for i in np.nonzero(np.isfinite(lp.upper))[0]:
        unit = np.zeros(n)
        unit[i] = 1.0
        rows.append((unit, float(lp.upper[i] - lower[i]), "le"))

    normalized = []
    for coeffs, rhs, kind in rows:
        if rhs < 0.0:
            coeffs, rhs = -coeffs, -rhs
            kind = {"le": "ge", "ge": "le", "eq": "eq"}[kind]
        normalized.append((coeffs, rhs, kind))

    m = len(normalized)
    n_slack = sum(1 for _, _, kind in normalized if kind != "eq")
    n_art = sum(1 for _, _, kind in normalized if kind != "le")
    total = n + n_slack + n_art
    a = np.zeros((m, total))
    b = np.zeros(m)
    basis = np.zeros(m, dtype=int)
    art_mask = np.zeros(total, dtype=bool)
    slack_ptr, art_ptr = n, n + n_slack
    for r, (coeffs, rhs, kind) in enumerate(normalized):
        a[r, :n] = coeffs
        b[r] = rhs
        if kind == "le":
            a[r, slack_ptr] = 1.0
            basis[r] = slack_ptr
            slack_ptr += 1
        elif kind == "ge":
            a[r, slack_ptr] = -1.0
            slack_ptr += 1
            a[r, art_ptr] = 1.0
            basis[r] = art_ptr
            art_mask[art_ptr] = True
            art_ptr += 1
        else:
            a[r, art_ptr] = 1.0
            basis[r] = art_ptr
            art_mask[art_ptr] = True
            art_ptr += 1

    if max_iterations is None:
        max_iterations = 500 + 50 * (m + total)
    iterations = 0

    def extract() -> np.ndarray:
        x_full = np.zeros(total)
        x_full[basis] = b
        return x_full[:n] + lower

    try:
        if n_art:
            phase1_cost = art_mask.astype(float)
            iterations = _iterate(
                a, b, basis, phase1_cost, np.zeros(total, bool), max_iterations, iterations
            )
            if float(phase1_cost[basis] @ b) > _FEAS_TOL:
                raise SolverFailure("LP is infeasible")
            # drive leftover artificials out of the basis; drop dependent rows
            keep = np.ones(m, dtype=bool)
            for r in range(m):
                if not art_mask[basis[r]]:
                    continue
                pivot_col = -1
                for j in range(total):
                    if not art_mask[j] and abs(a[r, j]) > _PIVOT_TOL:
                        pivot_col = j
                        break
                if pivot_col >= 0:
                    _pivot(a, b, basis, r, pivot_col)
                else:
                    keep[r] = False
            if not keep.all():
                a = a[keep]
                b = b[keep]
                basis = basis[keep]
                m = a.shape[0]
        phase2_cost = np.zeros(total)
        phase2_cost[:n] = lp.c
        iterations = _iterate(a, b, basis, phase2_cost, art_mask, max_iterations, iterations)
    except _IterationLimit as limit:
        x = extract()
        raise SolverFailure(
            f"simplex iteration limit ({max_iterations}) exceeded",
            best_x=x,
            best_objective=float(lp.c @ x),
        ) from None

    x = extract()
    return LPSolution(x=x, objective=float(lp.c @ x), iterations=iterations)
