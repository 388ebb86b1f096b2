"""Dense two-phase simplex and the charging linear program built on it.

The charging LP minimizes forecast-priced energy over a horizon subject to
storage dynamics, an SOC corridor on interior hours, a terminal-SOC
equality, and per-hour rate bounds. Problems are small (horizon <= 24), so
a dense tableau with Bland's rule (deterministic, cycle-free) is plenty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpInfeasibleError, LpUnboundedError

_TOL = 1e-9


def simplex_solve(c, a_mat, b, is_eq, labels=None, max_iter=20000):
    """Minimize c @ x subject to a_mat @ x (<= / ==) b, x >= 0.

    ``is_eq`` marks equality rows. Returns (x, objective). Raises
    LpInfeasibleError (naming a binding row label when identifiable) or
    LpUnboundedError.
    """
    c = np.asarray(c, dtype=np.float64)
    a_mat = np.atleast_2d(np.asarray(a_mat, dtype=np.float64)).copy()
    b = np.asarray(b, dtype=np.float64).copy()
    is_eq = np.asarray(is_eq, dtype=bool)
    m, n = a_mat.shape
    if labels is None:
        labels = [f"row {i}" for i in range(m)]

    flip = b < 0
    a_mat[flip] *= -1.0
    b[flip] *= -1.0
    le_rows = ~flip & ~is_eq       # keep a slack
    ge_rows = flip & ~is_eq        # flipped <= becomes >=: surplus + artificial

    n_slack = int(le_rows.sum())
    n_surplus = int(ge_rows.sum())
    n_art = int((ge_rows | is_eq).sum())
    width = n + n_slack + n_surplus + n_art
    tableau = np.zeros((m, width + 1), dtype=np.float64)
    tableau[:, :n] = a_mat
    tableau[:, -1] = b
    basis = np.empty(m, dtype=np.int64)
    art_of_row = np.full(m, -1, dtype=np.int64)
    col_slack = n
    col_surplus = n + n_slack
    col_art = n + n_slack + n_surplus
    first_art = col_art
    for i in range(m):
        if le_rows[i]:
            tableau[i, col_slack] = 1.0
            basis[i] = col_slack
            col_slack += 1
        else:
            if ge_rows[i]:
                tableau[i, col_surplus] = -1.0
                col_surplus += 1
            tableau[i, col_art] = 1.0
            basis[i] = col_art
            art_of_row[i] = col_art
            col_art += 1

    def pivot(obj_row, row, col):
        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau[:, :] -= np.outer(factors, tableau[row])
        if obj_row[col] != 0.0:
            obj_row[:] -= obj_row[col] * tableau[row]
        basis[row] = col

    def run_phase(obj_row, allowed_width):
        for _ in range(max_iter):
            enter = -1
            for j in range(allowed_width):
                if obj_row[j] < -_TOL:
                    enter = j
                    break
            if enter < 0:
                return
            leave = -1
            best = np.inf
            for i in range(m):
                coef = tableau[i, enter]
                if coef > _TOL:
                    ratio = tableau[i, -1] / coef
                    if ratio < best - _TOL or (abs(ratio - best) <= _TOL and
                                               (leave < 0 or basis[i] < basis[leave])):
                        best = ratio
                        leave = i
            if leave < 0:
                raise LpUnboundedError("objective unbounded below")
            pivot(obj_row, leave, enter)
        raise RuntimeError("simplex iteration limit exceeded")

    # Phase 1: drive artificials to zero.
    if n_art:
        obj1 = np.zeros(width + 1, dtype=np.float64)
        obj1[first_art:width] = 1.0
        for i in range(m):
            if basis[i] >= first_art:
                obj1 -= tableau[i]
        run_phase(obj1, width)
        infeas = -obj1[-1]
        if infeas > 1e-7:
            worst = None
            for i in range(m):
                if basis[i] >= first_art and tableau[i, -1] > _TOL:
                    worst = labels[i]
                    break
            raise LpInfeasibleError(
                f"no feasible point (infeasibility {infeas:.3e}"
                + (f", binding constraint: {worst}" if worst else "") + ")",
                constraint=worst,
            )
        # Pivot lingering zero-level artificials out of the basis.
        for i in range(m):
            if basis[i] >= first_art:
                swapped = False
                for j in range(first_art):
                    if abs(tableau[i, j]) > _TOL:
                        pivot(obj1, i, j)
                        swapped = True
                        break
                if not swapped:
                    # Redundant row: zero it so it never constrains phase 2.
                    tableau[i, :] = 0.0

    obj2 = np.zeros(width + 1, dtype=np.float64)
    obj2[:n] = c
    for i in range(m):
        if basis[i] < first_art and obj2[basis[i]] != 0.0:
            obj2 -= obj2[basis[i]] * tableau[i]
    run_phase(obj2, first_art)

    x = np.zeros(width, dtype=np.float64)
    for i in range(m):
        if basis[i] < width:
            x[basis[i]] = tableau[i, -1]
    solution = x[:n]
    return solution, float(c @ solution)


@dataclass(frozen=True)
class LpProblem:
    """One charging plan: minimize sum_t price[t] * a[t] over the horizon.

    Dynamics soc[t+1] = soc[t] + a[t]; interior hours keep
    soc_min <= soc[t] <= capacity; the final SOC equals soc_target;
    actions stay within [-max_discharge, max_charge].
    """

    prices: np.ndarray
    soc_init: float
    soc_min: float
    capacity: float
    soc_target: float
    max_charge: float
    max_discharge: float

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=np.float64))
        if self.prices.ndim != 1 or self.prices.size < 1:
            raise ValueError("prices must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.prices)):
            raise ValueError("prices must be finite")
        if self.max_charge <= 0 or self.max_discharge <= 0:
            raise ValueError("rate bounds must be positive")
        if not 0 <= self.soc_min <= self.capacity:
            raise ValueError("soc_min must lie in [0, capacity]")
        if not self.soc_min <= self.soc_target <= self.capacity:
            raise ValueError("soc_target must lie in [soc_min, capacity]")

    @property
    def horizon(self) -> int:
        return int(self.prices.size)


def solve_charging_lp(problem: LpProblem):
    """Return (schedule, objective) for one charging LP.

    The schedule satisfies every constraint to 1e-9; infeasible problems
    raise LpInfeasibleError naming a binding constraint.
    """
    h = problem.horizon
    dis = problem.max_discharge
    span = dis + problem.max_charge
    # Shift to x = a + max_discharge >= 0 to fit the standard form.
    rows = []
    rhs = []
    eq = []
    labels = []
    for t in range(1, h):
        prefix = np.zeros(h)
        prefix[:t] = 1.0
        rows.append(prefix.copy())
        rhs.append(problem.capacity - problem.soc_init + t * dis)
        eq.append(False)
        labels.append(f"SOC upper bound at hour {t}")
        rows.append(-prefix)
        rhs.append(-(problem.soc_min - problem.soc_init + t * dis))
        eq.append(False)
        labels.append(f"SOC lower bound at hour {t}")
    for t in range(h):
        box = np.zeros(h)
        box[t] = 1.0
        rows.append(box)
        rhs.append(span)
        eq.append(False)
        labels.append(f"charge-rate bound at hour {t}")
    rows.append(np.ones(h))
    rhs.append(problem.soc_target - problem.soc_init + h * dis)
    eq.append(True)
    labels.append("terminal SOC target")

    x, _ = simplex_solve(problem.prices, np.vstack(rows), np.asarray(rhs),
                         np.asarray(eq), labels)
    schedule = x - dis
    objective = float(problem.prices @ schedule)
    return schedule, objective
