"""Dense two-phase primal simplex with Bland's anti-cycling rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-7
MAX_ITERATIONS = 10_000
RELATIONS = ("<=", "=", ">=")


class IterationLimit(RuntimeError):
    pass


@dataclass(frozen=True)
class LPRow:
    name: str
    coeffs: tuple[float, ...]
    relation: str
    rhs: float

    def __post_init__(self) -> None:
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")


@dataclass
class LPProblem:
    """Minimize ``objective . x`` subject to named rows and box bounds."""

    variables: list[str]
    objective: list[float]
    rows: list[LPRow] = field(default_factory=list)
    lower: list[float] | None = None
    upper: list[float | None] | None = None

    def __post_init__(self) -> None:
        n = len(self.variables)
        if len(self.objective) != n:
            raise ValueError("objective length differs from the variable count")
        self.lower = [0.0] * n if self.lower is None else list(self.lower)
        self.upper = [None] * n if self.upper is None else list(self.upper)
        if len(self.lower) != n or len(self.upper) != n:
            raise ValueError("bounds length differs from the variable count")
        for row in self.rows:
            if len(row.coeffs) != n:
                raise ValueError(f"row {row.name} has {len(row.coeffs)} coefficients for {n} variables")

    def add_row(self, name: str, coeffs: Sequence[float], relation: str, rhs: float) -> None:
        if len(coeffs) != len(self.variables):
            raise ValueError(f"row {name} has {len(coeffs)} coefficients for {len(self.variables)} variables")
        self.rows.append(LPRow(name, tuple(float(c) for c in coeffs), relation, float(rhs)))

    def rows_named(self, prefix: str) -> list[LPRow]:
        return [r for r in self.rows if r.name.split("[")[0] == prefix]

    def to_text(self) -> str:
        def expr(coeffs) -> str:
            terms = [f"{c:+.12g} {v}" for c, v in zip(coeffs, self.variables) if c != 0]
            return " ".join(terms) if terms else "0"

        lines = [f"min: {expr(self.objective)};"]
        for r in self.rows:
            lines.append(f"{r.name}: {expr(r.coeffs)} {r.relation} {r.rhs:.12g};")
        for v, lo, hi in zip(self.variables, self.lower, self.upper):
            hi_txt = "inf" if hi is None else f"{hi:.12g}"
            lines.append(f"bounds: {lo:.12g} <= {v} <= {hi_txt};")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LPSolution:
    status: str  # optimal, infeasible or unbounded
    objective: float | None = None
    x: tuple[float, ...] | None = None
    iterations: int = 0

    def value(self, lp: LPProblem, name: str) -> float:
        return self.x[lp.variables.index(name)]


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], ncols: int, budget: list[int]) -> str:
    """Minimize the objective stored in the last row of ``T`` over the first ``ncols`` columns."""
    m = T.shape[0] - 1
    while True:
        reduced = T[-1, :ncols]
        entering = next((j for j in range(ncols) if reduced[j] < -1e-10), None)
        if entering is None:
            return "optimal"
        col = T[:m, entering]
        best, leave = None, None
        for i in range(m):
            if col[i] > 1e-10:
                ratio = T[i, -1] / col[i]
                if best is None or ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return "unbounded"
        budget[0] += 1
        if budget[0] > MAX_ITERATIONS:
            raise IterationLimit(f"simplex exceeded {MAX_ITERATIONS} pivots")
        _pivot(T, leave, entering)
        basis[leave] = entering


def solve_lp(lp: LPProblem, tol: float = FEAS_TOL) -> LPSolution:
    """Solve by shifting to ``y = x - lower >= 0``, turning finite upper bounds
    into rows, adding slacks and running phase one on artificial variables."""
    n = len(lp.variables)
    lower = np.array(lp.lower, dtype=float)
    rows_a, rows_b, rels = [], [], []
    for r in lp.rows:
        a = np.array(r.coeffs, dtype=float)
        rows_a.append(a)
        rows_b.append(r.rhs - a @ lower)
        rels.append(r.relation)
    for j, hi in enumerate(lp.upper):
        if hi is not None:
            if hi < lp.lower[j] - tol:
                return LPSolution("infeasible")
            a = np.zeros(n)
            a[j] = 1.0
            rows_a.append(a)
            rows_b.append(hi - lower[j])
            rels.append("<=")
    m = len(rows_a)
    n_slack = sum(rel != "=" for rel in rels)
    A = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    s = n
    for i, (a, rhs, rel) in enumerate(zip(rows_a, rows_b, rels)):
        A[i, :n] = a
        if rel == "<=":
            A[i, s] = 1.0
            s += 1
        elif rel == ">=":
            A[i, s] = -1.0
            s += 1
        b[i] = rhs
        if b[i] < 0:
            A[i] *= -1
            b[i] *= -1
    width = n + n_slack
    # phase one: artificial basis
    T = np.zeros((m + 1, width + m + 1))
    T[:m, :width] = A
    T[:m, width:width + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :width] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(width, width + m))
    budget = [0]
    _run(T, basis, width + m, budget)
    if -T[-1, -1] > tol * max(1.0, m):
        return LPSolution("infeasible", iterations=budget[0])
    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= width:
            pivot_col = next((j for j in range(width) if abs(T[i, j]) > 1e-9), None)
            if pivot_col is not None:
                _pivot(T, i, pivot_col)
                basis[i] = pivot_col
    keep = [i for i in range(m) if basis[i] < width]
    T2 = np.zeros((len(keep) + 1, width + 1))
    T2[:-1, :width] = T[keep, :width]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[i] for i in keep]
    c = np.zeros(width)
    c[:n] = lp.objective
    T2[-1, :width] = c
    for i, j in enumerate(basis2):
        T2[-1] -= c[j] * T2[i]
    status = _run(T2, basis2, width, budget)
    if status == "unbounded":
        return LPSolution("unbounded", iterations=budget[0])
    y = np.zeros(width)
    for i, j in enumerate(basis2):
        y[j] = T2[i, -1]
    x = y[:n] + lower
    return LPSolution("optimal", float(np.dot(lp.objective, x)), tuple(float(v) for v in x), budget[0])


def check_solution(lp: LPProblem, x: Sequence[float], tol: float = FEAS_TOL) -> list[str]:
    """Names of rows and bounds that ``x`` violates by more than ``tol``."""
    bad = []
    xv = np.array(x, dtype=float)
    for r in lp.rows:
        lhs = float(np.dot(r.coeffs, xv))
        if (r.relation == "<=" and lhs > r.rhs + tol) or (r.relation == ">=" and lhs < r.rhs - tol) \
                or (r.relation == "=" and abs(lhs - r.rhs) > tol):
            bad.append(r.name)
    for v, val, lo, hi in zip(lp.variables, xv, lp.lower, lp.upper):
        if val < lo - tol or (hi is not None and val > hi + tol):
            bad.append(f"bounds {v}")
    return bad


__all__ = ["FEAS_TOL", "MAX_ITERATIONS", "IterationLimit", "LPProblem", "LPRow", "LPSolution", "check_solution", "solve_lp"]
